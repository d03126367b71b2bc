#pragma once

// Drift functionals a: C_- -> R^d and empirical estimators for the three
// structural constants: the exponential-kernel Lipschitz constant K, the
// dissipativity pair (C1, C2) and the linear-growth constant C3.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "memsde/history.hpp"

namespace memsde {

struct OrnsteinUhlenbeck {
  double b = 1.0;
};

/// a = -b (1 + eps * tanh(M)) x(0), M = int lambda e^{lambda s} <u, x(s)> ds.
struct ModulatedDamping {
  double b = 1.0;
  double epsilon = 0.5;
  double rate = 1.0;
};

/// a = -b x(0) + kappa * int lambda e^{lambda s} x(s) ds.
struct LinearDistributedDelay {
  double b = 1.0;
  double kappa = 0.0;
  double rate = 1.0;
};

struct DriftSpec;

/// Sum of the parts; empty means a == 0.
struct Composite {
  std::vector<DriftSpec> parts;
};

using DriftFamily = std::variant<OrnsteinUhlenbeck, ModulatedDamping, LinearDistributedDelay, Composite>;

struct DriftSpec {
  DriftFamily family;
  std::size_t dimension = 1;
  /// Unit vector u for ModulatedDamping; empty means the first axis.
  Vector direction;

  static DriftSpec ou(double b, std::size_t d = 1);
  static DriftSpec modulated_damping(double b, double epsilon, double rate, std::size_t d = 1);
  static DriftSpec linear_delay(double b, double kappa, double rate, std::size_t d = 1);
  static DriftSpec composite(std::vector<DriftSpec> parts, std::size_t d = 1);
  static DriftSpec zero(std::size_t d = 1) { return composite({}, d); }

  /// Throws std::invalid_argument when parameters are outside the family's range.
  void validate() const;
  /// Short stable identifier, e.g. "modulated_damping(b=1,epsilon=0.5,lambda=1)".
  std::string id() const;
};

/// Kernels the drift reads from a history.
std::vector<KernelKey> required_kernels(const DriftSpec& spec);
void register_kernels(const DriftSpec& spec, PastHistory& h);

void evaluate_into(const DriftSpec& spec, const PastHistory& h, std::span<double> out);
Vector evaluate(const DriftSpec& spec, const PastHistory& h);

/// The memory functionals the drift depends on, e.g. M for ModulatedDamping
/// and the d-vector memory for LinearDistributedDelay. Empty for OU.
Vector memory_features(const DriftSpec& spec, const PastHistory& h);

/// What each family guarantees analytically.
struct DeclaredConditions {
  bool lipschitz = false;
  /// K(R) = K_constant + K_slope * R on the domain |x(0)| <= R.
  double K_constant = 0.0;
  double K_slope = 0.0;
  bool dissipative = false;
  double C1 = 0.0;
  double C2 = 0.0;
  bool linear_growth = false;
  double C3 = 0.0;

  bool lipschitz_domain_restricted() const noexcept { return K_slope != 0.0; }
  double lipschitz_K(double radius) const noexcept { return K_constant + K_slope * radius; }
};

DeclaredConditions declared_conditions(const DriftSpec& spec);

/// Seeded generator of past histories used by the estimators. Sample i is a
/// pure function of (seed, i): an endpoint e with |e| <= pool_radius (or
/// e = 0 for a zero-endpoint probe) plus one of
///   - a constant past x == e,
///   - e + random Fourier sum vanishing at 0, damped by e^{envelope_rate s},
///   - e + c (1 - e^{beta s}) (constant offset relaxing into the endpoint).
/// Pairs for the Lipschitz estimator share the endpoint; half of them differ
/// by a sign-constant perturbation along one direction.
struct PathSamplerConfig {
  std::size_t samples = 10000;
  double pool_radius = 1.0;
  double grid_step = 0.05;
  std::size_t window_steps = 400;
  std::size_t fourier_modes = 4;
  double perturbation_scale = 1.0;
  double envelope_rate = 0.5;
  double zero_endpoint_fraction = 0.05;
  double constant_fraction = 0.1;
  std::uint64_t seed = 1;
};

PastHistory sample_past(const PathSamplerConfig& cfg, std::size_t index, std::size_t dimension);
std::pair<PastHistory, PastHistory> sample_past_pair(const PathSamplerConfig& cfg,
                                                     std::size_t index, std::size_t dimension);

struct Witness {
  std::size_t index = 0;
  std::vector<Vector> x_window;
  std::vector<Vector> y_window;  // empty for single-path witnesses
  double ratio = 0.0;
  std::string note;
};

struct ConditionReport {
  std::string drift_id;
  double domain_bound = 0.0;
  std::size_t samples_drawn = 0;
  std::size_t samples_used = 0;
  double kernel_rate = 0.0;

  std::optional<double> K_hat;
  std::optional<double> C1_hat;
  std::optional<double> C2_hat;
  std::optional<double> C3_hat;

  std::vector<Witness> witnesses;
  std::vector<std::string> violations;
  double grid_step = 0.0;
};

/// K_hat = max |a(x) - a(y)| / int e^{rate s} |x(s) - y(s)| ds over sampled
/// equal-endpoint pairs with |x(0)| <= domain_bound.
ConditionReport estimate_lipschitz(const DriftSpec& spec, double rate,
                                   const PathSamplerConfig& sampler, double domain_bound,
                                   std::size_t threads = 1);

/// (C1, C2) envelope: C2 is the largest value with (a, x(0)) + C2 |x(0)|^2 <= 0
/// on the outer shell |x(0)| >= shell_fraction * domain_bound; C1 is the
/// largest residual over all samples (never negative).
ConditionReport estimate_dissipativity(const DriftSpec& spec, const PathSamplerConfig& sampler,
                                       double domain_bound, double shell_fraction = 0.5,
                                       std::size_t threads = 1);

/// C3 = max |a| / |x(0)| over samples with x(0) != 0.
ConditionReport estimate_growth(const DriftSpec& spec, const PathSamplerConfig& sampler,
                                double domain_bound, std::size_t threads = 1);

/// Recomputes a Lipschitz witness ratio from its stored windows.
double lipschitz_ratio(const DriftSpec& spec, double rate, double grid_step, const Witness& w);

}  // namespace memsde
