#include "doctest.h"

#include <cmath>
#include <numeric>
#include <set>

#include "memsde/parallel.hpp"
#include "memsde/rng.hpp"

using namespace memsde;

TEST_SUITE("rng") {

TEST_CASE("philox4x32-10 known-answer vectors") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniforms stay in the open unit interval") {
  CHECK(to_open_unit(0) > 0.0);
  CHECK(to_open_unit(~std::uint64_t{0}) < 1.0);
}

TEST_CASE("same (seed, step) gives the same increment in any query order") {
  const NoiseStream s(42, 3, 3);
  const auto late = s.increment(1000, 0.01);
  const auto early = s.increment(5, 0.01);
  CHECK(s.increment(1000, 0.01) == late);
  CHECK(s.increment(5, 0.01) == early);
  const auto batch = wiener_increments(s, 0, 10, 0.01);
  CHECK(batch[5] == early);
  CHECK(NoiseStream(42, 4, 3).increment(5, 0.01) != early);
  CHECK(NoiseStream(43, 3, 3).increment(5, 0.01) != early);
}

TEST_CASE("stream domains do not collide") {
  std::set<std::uint64_t> ids;
  for (auto dom : {StreamDomain::noise, StreamDomain::time_sampling, StreamDomain::path_sampler,
                   StreamDomain::bootstrap, StreamDomain::projections, StreamDomain::calibration}) {
    for (std::uint64_t i = 0; i < 4; ++i) CHECK(ids.insert(stream_id(dom, i)).second);
  }
}

TEST_CASE("increment moments: mean within 4e-3 sqrt(dt), variance dt +- 1%") {
  const double dt = 0.01;
  const std::size_t n = 1'000'000;
  const NoiseStream s(2024, 0, 1);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = s.increment(k, dt)[0];
  const double mean = pairwise_sum(v) / static_cast<double>(n);
  for (auto& x : v) x = (x - mean) * (x - mean);
  const double var = pairwise_sum(v) / static_cast<double>(n - 1);
  CHECK(std::abs(mean) <= 4e-3 * std::sqrt(dt));
  CHECK(std::abs(var - dt) <= 0.01 * dt);
}

TEST_CASE("odd dimensions use both normals of a block without reuse across steps") {
  const NoiseStream s(7, 0, 3);
  const auto a = s.increment(0, 1.0);
  const auto b = s.increment(1, 1.0);
  CHECK(a.size() == 3);
  CHECK(a[2] != b[0]);
  CHECK(a[0] != a[1]);
}

TEST_CASE("parallel_for is independent of the worker count") {
  std::vector<double> one(1000), four(1000);
  auto fill = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      CounterRng r(9, i);
      out[i] = r.normal();
    };
  };
  parallel_for(one.size(), 1, fill(one));
  parallel_for(four.size(), 4, fill(four));
  CHECK(one == four);
  CHECK(pairwise_sum(one) == pairwise_sum(four));
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "17");
  }
}

}
