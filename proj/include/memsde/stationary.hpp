#pragma once

// Krylov-Bogolyubov averages Q_T = (1/T) int_{-T}^0 P_s ds and the quantitative
// checks run against them: second-moment bound, increment tails and the
// windowed sub-exponential growth diagnostic.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsde/drift.hpp"
#include "memsde/integrator.hpp"

namespace memsde {

enum class SamplingMode { uniform_time, terminal };
enum class Observable { state, state_and_memory };

std::string_view to_string(SamplingMode m) noexcept;
SamplingMode sampling_mode_from_string(std::string_view s);

struct MeasureProvenance {
  std::size_t ensemble_size = 0;
  double horizon = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string rule;
  std::string drift_id;
};

/// Equal-weight sample cloud. The first state_dimension coordinates of each
/// sample are X; any further coordinates are memory features.
struct EmpiricalMeasure {
  std::size_t dimension = 0;
  std::size_t state_dimension = 0;
  std::vector<double> samples;
  MeasureProvenance provenance;

  std::size_t size() const noexcept { return dimension == 0 ? 0 : samples.size() / dimension; }
  std::span<const double> sample(std::size_t i) const noexcept {
    return {samples.data() + i * dimension, dimension};
  }
  Vector mean() const;
  /// E|X|^2 over the state coordinates.
  double second_moment() const;
  /// Population covariance over all coordinates, row-major dimension x dimension.
  std::vector<double> covariance() const;
};

struct KbOptions {
  SamplingMode mode = SamplingMode::uniform_time;
  Observable observable = Observable::state;
  std::size_t window_steps = 0;
  std::size_t threads = 1;
};

/// Uniform-time mode: trajectory i runs from the zero past and contributes
/// X(U_i), U_i ~ Uniform[0, T] (linear interpolation between grid nodes),
/// which is exactly a draw from the X(0)-marginal of Q_T. Terminal mode
/// contributes X_i(T).
EmpiricalMeasure kb_average(const DriftSpec& spec, std::size_t n, double T, double dt,
                            std::uint64_t seed, const KbOptions& options = {});

/// d = 1: exact W1 between the empirical CDFs. d > 1: W1 averaged over
/// `projections` seeded random directions (sliced W1).
double w1_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                   std::size_t projections = 64, std::uint64_t seed = 0);
double w1_distance_1d(std::vector<double> a, std::vector<double> b);

/// Standard error of second_moment() from `replicates` seeded bootstrap resamples.
double bootstrap_second_moment_se(const EmpiricalMeasure& m, std::size_t replicates = 200,
                                  std::uint64_t seed = 0);

struct BoundCheckReport {
  std::string bound_name;
  double theoretical = 0.0;
  double empirical = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::map<std::string, double> constants;
  /// Optional plot data.
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// (2 C1 + d) / (2 C2): the limit of y' = (2 C1 + d) - 2 C2 y.
double moment_bound(double C1, double C2, std::size_t dimension = 1);

/// Passes when E|X|^2 <= M* + sigmas * bootstrap SE.
BoundCheckReport moment_bound_check(const EmpiricalMeasure& m, double C1, double C2,
                                    double sigmas = 3.0, std::size_t replicates = 200,
                                    std::uint64_t seed = 0);

/// X at fixed times for each of n trajectories from a common past.
struct EnsembleSnapshots {
  std::vector<double> times;
  std::size_t dimension = 0;
  std::size_t ensemble_size = 0;
  std::vector<std::vector<double>> values;  // [time][trajectory * d + c]

  std::span<const double> at(std::size_t time_index, std::size_t trajectory) const noexcept {
    return {values[time_index].data() + trajectory * dimension, dimension};
  }
};

EnsembleSnapshots snapshot_ensemble(const DriftSpec& spec, const PastHistory& initial,
                                    std::vector<double> times, double dt, std::uint64_t seed,
                                    std::size_t n, std::size_t threads = 1);

/// 16 d (d + 2) z^-4 dt^2 + 4 C3^2 z^-2 M dt^2 (the first coefficient is 48 for d = 1).
double increment_tail_bound(double z, double dt_gap, double C3, double M, std::size_t dimension = 1);

/// Frequency of |X(t2) - X(t1)| > z against the bound, plus a binomial 3 sigma allowance.
BoundCheckReport increment_tail_check(const EnsembleSnapshots& ensemble, double z, double t1,
                                      double t2, double C3, double M);
BoundCheckReport increment_tail_check(std::span<const Trajectory> ensemble, double z, double t1,
                                      double t2, double C3, double M);

struct GrowthOptions {
  double delta = 0.1;
  double delta0 = 0.05;
  double k_window = 4.0;
  /// Allowed violations as a fraction of the windows.
  double allowed_fraction = 0.01;
};

/// Window n = [n, n+1], n = 1 .. floor(T) - 1: m_n = max |X| on the window,
/// violation when m_n > K n^{1/2 + delta0}. Rows: n, m_n, K n^{1/2+delta0},
/// m_n / n^{1/2+delta}.
BoundCheckReport growth_diagnostic(std::span<const double> values, std::size_t dimension,
                                   double dt, const GrowthOptions& options = {});
BoundCheckReport growth_diagnostic(const Trajectory& traj, const GrowthOptions& options = {});

}  // namespace memsde
