#pragma once

// Past histories x_-(s), s <= 0, as a finite sampled window plus exponentially
// weighted memory functionals I = int_{-inf}^0 e^{rate*s} phi(x(s)) ds that are
// advanced in O(1) per step.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memsde/types.hpp"

namespace memsde {

enum class Transform { identity, tanh, norm };

std::string_view to_string(Transform t) noexcept;
Transform transform_from_string(std::string_view name);

/// Output width of phi: 1 for the norm, d otherwise.
inline std::size_t transform_width(Transform t, std::size_t dimension) noexcept {
  return t == Transform::norm ? 1 : dimension;
}

void apply_transform(Transform t, std::span<const double> x, std::span<double> out) noexcept;

struct KernelKey {
  double rate = 1.0;
  Transform transform = Transform::identity;
  bool operator==(const KernelKey&) const = default;
};

/// One term of a parametric tail x(s) = amplitude * exp(rate * |s|). A rate of
/// zero is a constant; negative rates decay into the past.
struct TailTerm {
  Vector amplitude;
  double rate = 0.0;
};

struct KernelAccumulator {
  double rate = 0.0;
  Transform transform = Transform::identity;
  Vector value;     // recorded part, advanced by exact decay + trapezoid
  Vector tail;      // closed-form contribution of the modelled tail
  Vector total;     // value + tail
  Vector last_phi;  // phi(x(0)), reused as the left trapezoid node
  double decay = 1.0;
};

/// An element of C_-: window samples on [-(size-1)*grid_step, 0] (oldest first,
/// most recent last), a parametric tail beyond the window, and any number of
/// registered kernel accumulators.
class PastHistory {
 public:
  /// x_- == 0 on a window of `window_steps` steps; zero tail.
  static PastHistory zero(double grid_step, std::size_t window_steps, std::size_t dimension);
  /// Sampled window, oldest first; zero tail.
  static PastHistory sampled(double grid_step, std::vector<Vector> samples);
  /// Sampled window with an explicit parametric tail for s below the window.
  static PastHistory with_tail(double grid_step, std::vector<Vector> samples,
                               std::vector<TailTerm> tail);
  /// x_-(s) = sum_j amplitude_j * exp(rate_j * |s|), sampled on the window and
  /// continued analytically beyond it.
  static PastHistory analytic(double grid_step, std::size_t window_steps,
                              std::vector<TailTerm> terms);

  double grid_step() const noexcept { return grid_step_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t window_size() const noexcept { return size_; }
  std::size_t window_capacity() const noexcept { return capacity_; }
  double window_span() const noexcept { return static_cast<double>(size_ - 1) * grid_step_; }
  /// Time advanced since construction.
  double elapsed() const noexcept { return static_cast<double>(pushes_) * grid_step_; }
  std::uint64_t pushes() const noexcept { return pushes_; }
  /// True while no sample has been dropped from the window.
  bool intact() const noexcept { return dropped_ == 0; }

  /// Sample i of the window, i = 0 oldest.
  std::span<const double> sample(std::size_t i) const noexcept;
  std::span<const double> current() const noexcept { return sample(size_ - 1); }
  std::vector<Vector> window() const;

  const std::vector<TailTerm>& tail_terms() const noexcept { return tail_; }
  /// The tail is x(s) = sum amplitude * exp(rate * (tail_origin - s)) for s < tail_boundary.
  double tail_origin() const noexcept { return -elapsed(); }
  double tail_boundary() const noexcept { return initial_boundary_ - elapsed(); }

  /// Lets the window keep more samples before it starts dropping the oldest.
  void reserve_window(std::size_t capacity);

  /// Registers int e^{rate s} phi(x(s)) ds. Idempotent. Only allowed while the
  /// history is intact, since dropped samples can no longer be integrated.
  void register_kernel(double rate, Transform transform);
  bool has_kernel(double rate, Transform transform) const noexcept;
  std::size_t kernel_index(double rate, Transform transform) const;
  const std::vector<KernelAccumulator>& accumulators() const noexcept { return accumulators_; }

  /// Accumulator value plus tail contribution.
  std::span<const double> kernel_integral(double rate, Transform transform) const;
  std::span<const double> kernel_integral_at(std::size_t index) const noexcept {
    return accumulators_[index].total;
  }

  void push(double dt, std::span<const double> value);

  /// Rebuilds a history from serialized parts (see serialize.hpp).
  static PastHistory restore(double grid_step, std::vector<Vector> window,
                             std::vector<TailTerm> tail, double initial_boundary,
                             std::uint64_t pushes, std::uint64_t dropped,
                             std::vector<KernelAccumulator> accumulators);
  double initial_boundary() const noexcept { return initial_boundary_; }
  std::uint64_t dropped() const noexcept { return dropped_; }

 private:
  PastHistory(double grid_step, std::size_t dimension, std::vector<Vector> samples,
              std::vector<TailTerm> tail);

  Vector tail_integral(double rate, Transform transform) const;

  double grid_step_;
  std::size_t dimension_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t start_ = 0;
  std::vector<double> ring_;
  std::vector<TailTerm> tail_;
  double initial_boundary_;
  std::uint64_t pushes_ = 0;
  std::uint64_t dropped_ = 0;
  std::vector<KernelAccumulator> accumulators_;
};

/// Value-returning form of PastHistory::push.
PastHistory push_sample(PastHistory h, double dt, std::span<const double> value);

std::span<const double> kernel_integral(const PastHistory& h, double rate, Transform transform);

/// Truncated sum_{n=1}^{n_max} 2^{-n} min(max_{-n<=t<=0} |f - g|, 1) over two
/// paths sampled on the same grid, most recent sample last.
double lu_metric(double grid_step, std::size_t dimension, std::span<const double> f,
                 std::span<const double> g, int n_max);
double lu_metric(const PastHistory& f, const PastHistory& g, int n_max);

/// A time-indexed record of (X, W) on a uniform grid. Sample i sits at time
/// (first_index + i) * grid_step. W is stored as a base array plus an anchor
/// subtracted on read, so re-anchoring under shifts is exactly reversible.
/// W is NaN where it was never recorded (the part that came from a past).
struct PathRecord {
  double grid_step = 0.0;
  std::int64_t first_index = 0;
  std::size_t dimension = 0;
  std::vector<double> x;
  std::vector<double> w_base;
  Vector w_anchor;

  std::size_t size() const noexcept { return dimension == 0 ? 0 : x.size() / dimension; }
  double time(std::size_t i) const noexcept {
    return static_cast<double>(first_index + static_cast<std::int64_t>(i)) * grid_step;
  }
  std::span<const double> x_at(std::size_t i) const noexcept {
    return {x.data() + i * dimension, dimension};
  }
  double w_at(std::size_t i, std::size_t c) const noexcept {
    return w_base[i * dimension + c] - w_anchor[c];
  }
  /// Sample position of grid time index k, if stored.
  std::optional<std::size_t> position_of(std::int64_t k) const noexcept;
};

enum class SpliceMode { girsanov, coupling };

/// Path equal to the past on s < 0 and to the future on s >= 0. The future is
/// given as flat node values starting at t = 0; w_future may be empty (then W
/// is left unrecorded). Girsanov mode requires y_past(0) == x_future(0).
PathRecord splice(const PastHistory& y_past, std::span<const double> x_future,
                  std::span<const double> w_future, SpliceMode mode);

/// theta_s: X(t) -> X(t - s), W(t) -> W(t - s) - W(-s). s must be a multiple
/// of the grid step and -s must be a stored time with recorded W.
PathRecord shift(const PathRecord& path, double s);

}  // namespace memsde
