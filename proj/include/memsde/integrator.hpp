#pragma once

// Explicit Euler-Maruyama for dX = a(pi_t X) dt + dW from a Cauchy past.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsde/drift.hpp"
#include "memsde/history.hpp"
#include "memsde/rng.hpp"

namespace memsde {

/// |X| above this is treated as a blow-up.
inline constexpr double kBlowupThreshold = 1e12;

struct StoppingRecord {
  std::size_t node = 0;  // first node with |X| >= radius
  double radius = 0.0;
};

struct Trajectory {
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t dimension = 0;
  std::vector<double> x;   // (steps + 1) * d, node-major
  std::vector<double> w;   // (steps + 1) * d, w(0) = 0
  std::vector<double> dw;  // steps * d, the realized increments
  std::uint64_t seed = 0;
  std::uint64_t index = 0;  // trajectory index within the seeded ensemble
  bool noise_from_stream = true;
  std::optional<double> stopping_radius;
  std::optional<StoppingRecord> tau_r;
  std::string drift_spec_id;
  std::string initial_history_id;

  double horizon() const noexcept { return static_cast<double>(steps) * dt; }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  std::span<const double> x_at(std::size_t k) const noexcept {
    return {x.data() + k * dimension, dimension};
  }
  std::span<const double> w_at(std::size_t k) const noexcept {
    return {w.data() + k * dimension, dimension};
  }
  std::span<const double> dw_at(std::size_t k) const noexcept {
    return {dw.data() + k * dimension, dimension};
  }
};

/// Serial stepper that owns the evolving history. Each call to advance()
/// applies X <- X + a(history) dt + dW and pushes the new value.
class EulerMaruyama {
 public:
  EulerMaruyama(const DriftSpec& spec, PastHistory history);

  void advance(std::span<const double> dW);
  const PastHistory& history() const noexcept { return history_; }
  std::span<const double> current() const noexcept { return history_.current(); }
  /// Drift evaluated at the current history (valid after construction and every advance).
  std::span<const double> last_drift() const noexcept { return drift_; }
  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  const DriftSpec* spec_;
  PastHistory history_;
  double dt_;
  Vector drift_;
  Vector next_;
  std::size_t steps_ = 0;
};

/// One Euler step; value form. Throws IntegrationError on a non-finite drift.
PastHistory step(PastHistory state, const DriftSpec& spec, std::span<const double> dW, double dt);

/// Number of steps in [0, T]; throws unless T/dt is (numerically) integral.
std::size_t step_count(double T, double dt);

Trajectory simulate(const DriftSpec& spec, const PastHistory& initial, double T, double dt,
                    std::uint64_t seed, std::optional<double> stopping_radius = std::nullopt,
                    std::uint64_t trajectory_index = 0);

/// Same recursion driven by caller-supplied increments (steps * d values).
Trajectory simulate_with_increments(const DriftSpec& spec, const PastHistory& initial, double dt,
                                    std::span<const double> increments,
                                    std::optional<double> stopping_radius = std::nullopt);

/// Independent replay: rebuilds the history node by node, regenerates the
/// increments (or uses the stored ones) and returns
/// max_k |X_{k+1} - X_k - a(pi_{t_k} X) dt - dW_k|.
double replay_residual(const Trajectory& traj, const DriftSpec& spec, const PastHistory& initial);

/// (X, W) record on [0, T] with W anchored at t = 0.
PathRecord to_record(const Trajectory& traj);

/// splice() with the trajectory as the future.
PathRecord splice(const PastHistory& y_past, const Trajectory& x_future, SpliceMode mode);

}  // namespace memsde
