#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, stream, position), so ensembles reproduce bit for bit regardless
// of how work is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace memsde {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) noexcept {
  constexpr std::uint32_t kMulA = 0xD2511F53;
  constexpr std::uint32_t kMulB = 0xCD9E8D57;
  constexpr std::uint32_t kWeylA = 0x9E3779B9;
  constexpr std::uint32_t kWeylB = 0xBB67AE85;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

/// Streams are partitioned by purpose so that, e.g., the noise of trajectory i
/// never overlaps the time-sampling draws of trajectory i.
enum class StreamDomain : std::uint64_t {
  noise = 0,
  time_sampling = 1,
  path_sampler = 2,
  bootstrap = 3,
  projections = 4,
  calibration = 5,
};

inline std::uint64_t stream_id(StreamDomain domain, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(domain) << 56) ^ (index & ((std::uint64_t{1} << 56) - 1));
}

/// Maps the top 52 bits of a 64-bit word to the midpoints k + 1/2 of a 2^-52
/// grid, so both ends of (0, 1) stay exactly representable.
inline double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Random-access block generator: block(position) returns two uniforms from
/// one Philox call keyed by the seed and addressed by (stream, position).
class CounterEngine {
 public:
  CounterEngine(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  std::array<double, 2> uniforms(std::uint64_t position) const noexcept {
    const auto out = philox4x32({static_cast<std::uint32_t>(position),
                                 static_cast<std::uint32_t>(position >> 32),
                                 static_cast<std::uint32_t>(stream_),
                                 static_cast<std::uint32_t>(stream_ >> 32)},
                                key_);
    const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    return {to_open_unit(a), to_open_unit(b)};
  }

  // Box-Muller on the block at `position`.
  std::array<double, 2> normals(std::uint64_t position) const noexcept {
    const auto [u1, u2] = uniforms(position);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
};

/// Sequential convenience view over a CounterEngine. Cheap to copy; two
/// copies at the same position produce the same values.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : engine_(seed, stream) {}

  double uniform() noexcept {
    if (!have_uniform_) {
      cached_uniform_ = engine_.uniforms(position_++);
      have_uniform_ = true;
      return cached_uniform_[0];
    }
    have_uniform_ = false;
    return cached_uniform_[1];
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    if (!have_normal_) {
      cached_normal_ = engine_.normals(position_++);
      have_normal_ = true;
      return cached_normal_[0];
    }
    have_normal_ = false;
    return cached_normal_[1];
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    const auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  CounterEngine engine_;
  std::uint64_t position_ = 0;
  std::array<double, 2> cached_uniform_{};
  std::array<double, 2> cached_normal_{};
  bool have_uniform_ = false;
  bool have_normal_ = false;
};

/// Wiener increments for one trajectory: the increment of step k is
/// sqrt(dt) * Z with Z ~ N(0, I_d) fixed by (seed, trajectory, k).
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t trajectory, std::size_t dimension) noexcept
      : engine_(seed, stream_id(StreamDomain::noise, trajectory)),
        seed_(seed),
        trajectory_(trajectory),
        dimension_(dimension),
        blocks_per_step_((dimension + 1) / 2) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t trajectory() const noexcept { return trajectory_; }
  std::size_t dimension() const noexcept { return dimension_; }

  /// Writes the dt-scaled increment of step k into out (size = dimension).
  void increment(std::uint64_t k, double dt, std::span<double> out) const noexcept {
    const double scale = std::sqrt(dt);
    const std::uint64_t base = k * blocks_per_step_;
    for (std::size_t j = 0; j < blocks_per_step_; ++j) {
      const auto z = engine_.normals(base + j);
      out[2 * j] = scale * z[0];
      if (2 * j + 1 < dimension_) out[2 * j + 1] = scale * z[1];
    }
  }

  std::vector<double> increment(std::uint64_t k, double dt) const {
    std::vector<double> v(dimension_);
    increment(k, dt, v);
    return v;
  }

 private:
  CounterEngine engine_;
  std::uint64_t seed_;
  std::uint64_t trajectory_;
  std::size_t dimension_;
  std::size_t blocks_per_step_;
};

/// Increments for steps [first, first + count).
std::vector<std::vector<double>> wiener_increments(const NoiseStream& stream, std::uint64_t first,
                                                   std::uint64_t count, double dt);

}  // namespace memsde
