#pragma once

// Change of past: drift discrepancy between a trajectory and the same future
// spliced onto a different past, the Novikov integral and the Girsanov
// density, and the shared-noise coupling experiment behind uniqueness.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsde/drift.hpp"
#include "memsde/integrator.hpp"

namespace memsde {

/// |x_-(s) - y_-(s)| <= K' e^{lambda' |s|} together with the
/// kernel-Lipschitz constant K at rate lambda gives
/// |a(pi_t X) - a(pi_t yX)| <= L e^{-lambda t}, L = K K' / (lambda - lambda').
struct DiscrepancyBound {
  double K = 0.0;
  double K_prime = 0.0;
  double rate = 1.0;
  double rate_prime = 0.5;

  double L() const;
};

struct DiscrepancyProfile {
  double dt = 0.0;
  std::size_t dimension = 0;
  std::vector<double> times;
  std::vector<double> magnitude;  // |delta a| per node
  std::vector<double> delta;      // a(pi_t yX) - a(pi_t X), node-major
  DiscrepancyBound bound;
  double L = 0.0;

  double bound_at(std::size_t k) const noexcept;
  std::span<const double> delta_at(std::size_t k) const noexcept {
    return {delta.data() + k * dimension, dimension};
  }
};

/// Advances two history copies (one from each past) with the same realized
/// future samples, one push per node.
DiscrepancyProfile drift_discrepancy(const Trajectory& traj, const PastHistory& x_past,
                                     const PastHistory& y_past, const DriftSpec& spec,
                                     const DiscrepancyBound& bound);

/// K_hat from estimate_lipschitz with the sampler pool and the domain bound
/// both set to `radius`.
double domain_lipschitz(const DriftSpec& spec, double rate, double radius,
                        const PathSamplerConfig& sampler, std::size_t threads = 1);

struct GirsanovReport {
  double horizon = 0.0;
  double novikov_truncated = 0.0;  // (1/2) int_0^T |delta a|^2 dt
  double novikov_tail_bound = 0.0;  // L^2 e^{-2 lambda T} / (4 lambda)
  double novikov_integral = 0.0;    // truncated + tail bound
  double novikov_bound = 0.0;       // L^2 / (4 lambda)
  bool novikov_finite = false;
  std::optional<double> log_rn_density;
  std::optional<double> rn_density;
};

GirsanovReport novikov(const DiscrepancyProfile& profile, double horizon);

/// log density = sum_k delta a_k . dW_k - (1/2) sum_k |delta a_k|^2 dt.
GirsanovReport rn_density(const Trajectory& traj, const DiscrepancyProfile& profile,
                          GirsanovReport report);
double log_rn_density(std::span<const double> delta, std::span<const double> increments,
                      std::size_t dimension, double dt);

struct DensityEnsemble {
  std::size_t paths = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double min_density = 0.0;
  bool all_finite = true;
};

/// Mean Girsanov density over n independent trajectories from x_past (fixed-order summation).
DensityEnsemble rn_density_ensemble(const DriftSpec& spec, const PastHistory& x_past,
                                    const PastHistory& y_past, double T, double dt,
                                    std::uint64_t seed, std::size_t n, std::size_t threads = 1);

/// Bounded window functional F(X) = clamp(mean of X_c over [t, t + S], +-bound).
struct WindowFunctional {
  double window = 1.0;
  double bound = 10.0;
  std::size_t coordinate = 0;
};

struct CouplingReport {
  std::vector<double> times;
  std::vector<double> discrepancy;  // |X1 - X2| per node
  std::vector<double> average1;     // running ergodic averages, one per functional start node
  std::vector<double> average2;
  double final_average1 = 0.0;
  double final_average2 = 0.0;
  double final_gap = 0.0;
  WindowFunctional functional;
  Trajectory first;
  Trajectory second;
};

/// Both trajectories use noise stream (seed, 0).
CouplingReport couple(const DriftSpec& spec, const PastHistory& past1, const PastHistory& past2,
                      double T, double dt, std::uint64_t seed, const WindowFunctional& F = {});

/// F evaluated at every start node t_k with t_k + S <= T.
std::vector<double> window_functional_values(const Trajectory& traj, const WindowFunctional& F);
double ergodic_average(const Trajectory& traj, const WindowFunctional& F);

/// Standard deviation of ergodic_average over `replicates` independent noise
/// streams (trajectory indices 1 .. replicates) from the given past.
double calibrate_average_sd(const DriftSpec& spec, const PastHistory& past, double T, double dt,
                            std::uint64_t seed, std::size_t replicates, const WindowFunctional& F,
                            std::size_t threads = 1);

}  // namespace memsde
