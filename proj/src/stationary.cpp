#include "memsde/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memsde/parallel.hpp"
#include "memsde/rng.hpp"

namespace memsde {

std::string_view to_string(SamplingMode m) noexcept {
  return m == SamplingMode::uniform_time ? "uniform_time" : "terminal";
}

SamplingMode sampling_mode_from_string(std::string_view s) {
  if (s == "uniform_time") return SamplingMode::uniform_time;
  if (s == "terminal") return SamplingMode::terminal;
  throw std::invalid_argument("unknown sampling mode '" + std::string(s) + "'");
}

Vector EmpiricalMeasure::mean() const {
  Vector m(dimension, 0.0);
  const std::size_t n = size();
  std::vector<double> column(n);
  for (std::size_t c = 0; c < dimension; ++c) {
    for (std::size_t i = 0; i < n; ++i) column[i] = samples[i * dimension + c];
    m[c] = pairwise_sum(column) / static_cast<double>(n);
  }
  return m;
}

double EmpiricalMeasure::second_moment() const {
  const std::size_t n = size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < state_dimension; ++c) {
      const double v = samples[i * dimension + c];
      sq[i] += v * v;
    }
  }
  return pairwise_sum(sq) / static_cast<double>(n);
}

std::vector<double> EmpiricalMeasure::covariance() const {
  const std::size_t n = size();
  const Vector mu = mean();
  std::vector<double> cov(dimension * dimension, 0.0);
  std::vector<double> prod(n);
  for (std::size_t a = 0; a < dimension; ++a) {
    for (std::size_t b = a; b < dimension; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        prod[i] = (samples[i * dimension + a] - mu[a]) * (samples[i * dimension + b] - mu[b]);
      }
      const double v = pairwise_sum(prod) / static_cast<double>(n);
      cov[a * dimension + b] = v;
      cov[b * dimension + a] = v;
    }
  }
  return cov;
}

namespace {

void observe(const DriftSpec& spec, const EulerMaruyama& em, Observable observable,
             std::span<double> out) {
  const auto x = em.current();
  std::copy(x.begin(), x.end(), out.begin());
  if (observable == Observable::state_and_memory) {
    const Vector f = memory_features(spec, em.history());
    std::copy(f.begin(), f.end(), out.begin() + static_cast<long>(x.size()));
  }
}

}  // namespace

EmpiricalMeasure kb_average(const DriftSpec& spec, std::size_t n, double T, double dt,
                            std::uint64_t seed, const KbOptions& options) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("kb_average: ensemble size must be positive");
  const std::size_t steps = step_count(T, dt);
  const std::size_t d = spec.dimension;

  std::size_t width = d;
  if (options.observable == Observable::state_and_memory) {
    PastHistory probe = PastHistory::zero(dt, 0, d);
    register_kernels(spec, probe);
    width += memory_features(spec, probe).size();
  }

  EmpiricalMeasure m;
  m.dimension = width;
  m.state_dimension = d;
  m.samples.assign(n * width, 0.0);
  m.provenance = {n, T, dt, seed, std::string(to_string(options.mode)), spec.id()};

  parallel_for(n, options.threads, [&](std::size_t i) {
    try {
      const NoiseStream noise(seed, i, d);
      EulerMaruyama em(spec, PastHistory::zero(dt, options.window_steps, d));
      Vector dw(d);
      std::size_t target = steps;
      double frac = 0.0;
      if (options.mode == SamplingMode::uniform_time) {
        CounterRng rng(seed, stream_id(StreamDomain::time_sampling, i));
        const double pos = rng.uniform() * static_cast<double>(steps);
        target = std::min(static_cast<std::size_t>(pos), steps);
        frac = target == steps ? 0.0 : pos - static_cast<double>(target);
      }
      for (std::size_t k = 0; k < target; ++k) {
        noise.increment(k, dt, dw);
        em.advance(dw);
      }
      std::span<double> out(m.samples.data() + i * width, width);
      observe(spec, em, options.observable, out);
      if (frac > 0.0) {
        noise.increment(target, dt, dw);
        em.advance(dw);
        Vector next(width);
        observe(spec, em, options.observable, next);
        for (std::size_t c = 0; c < width; ++c) out[c] += frac * (next[c] - out[c]);
      }
    } catch (const IntegrationError& e) {
      throw IntegrationError("trajectory " + std::to_string(i) + ": " + e.what(),
                             e.last_finite_node(), e.last_finite_value());
    }
  });
  return m;
}

double w1_distance_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("w1_distance: empty measure");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double wa = 1.0 / static_cast<double>(a.size());
  const double wb = 1.0 / static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = 0.0;
  double fb = 0.0;
  double prev = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    const double next = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    total += std::abs(fa - fb) * (next - prev);
    while (i < a.size() && a[i] == next) {
      fa += wa;
      ++i;
    }
    while (j < b.size() && b[j] == next) {
      fb += wb;
      ++j;
    }
    prev = next;
  }
  return total;
}

double w1_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t projections,
                   std::uint64_t seed) {
  if (a.dimension != b.dimension) throw std::invalid_argument("w1_distance: dimension mismatch");
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("w1_distance: empty measure");
  const std::size_t d = a.dimension;
  auto project = [](const EmpiricalMeasure& m, const Vector& dir) {
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = dot(m.sample(i), dir);
    return out;
  };
  if (d == 1) return w1_distance_1d(a.samples, b.samples);
  if (projections == 0) throw std::invalid_argument("w1_distance: need at least one projection");
  std::vector<double> values(projections);
  for (std::size_t p = 0; p < projections; ++p) {
    CounterRng rng(seed, stream_id(StreamDomain::projections, p));
    Vector dir(d);
    double n = 0.0;
    while (n < 1e-12) {
      for (auto& c : dir) c = rng.normal();
      n = norm(dir);
    }
    for (auto& c : dir) c /= n;
    values[p] = w1_distance_1d(project(a, dir), project(b, dir));
  }
  return pairwise_sum(values) / static_cast<double>(projections);
}

double bootstrap_second_moment_se(const EmpiricalMeasure& m, std::size_t replicates,
                                  std::uint64_t seed) {
  const std::size_t n = m.size();
  if (n == 0) throw std::invalid_argument("bootstrap: empty measure");
  if (replicates < 2) throw std::invalid_argument("bootstrap: need at least two replicates");
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m.state_dimension; ++c) {
      const double v = m.samples[i * m.dimension + c];
      sq[i] += v * v;
    }
  }
  std::vector<double> stats(replicates);
  std::vector<double> draw(n);
  for (std::size_t r = 0; r < replicates; ++r) {
    CounterRng rng(seed, stream_id(StreamDomain::bootstrap, r));
    for (std::size_t i = 0; i < n; ++i) draw[i] = sq[rng.below(n)];
    stats[r] = pairwise_sum(draw) / static_cast<double>(n);
  }
  const double mean = pairwise_sum(stats) / static_cast<double>(replicates);
  for (auto& s : stats) s = (s - mean) * (s - mean);
  return std::sqrt(pairwise_sum(stats) / static_cast<double>(replicates - 1));
}

double moment_bound(double C1, double C2, std::size_t dimension) {
  if (!(C2 > 0.0)) throw std::invalid_argument("moment bound requires C2 > 0");
  return (2.0 * C1 + static_cast<double>(dimension)) / (2.0 * C2);
}

BoundCheckReport moment_bound_check(const EmpiricalMeasure& m, double C1, double C2,
                                    double sigmas, std::size_t replicates, std::uint64_t seed) {
  BoundCheckReport r;
  r.bound_name = "second_moment";
  r.theoretical = moment_bound(C1, C2, m.state_dimension);
  r.empirical = m.second_moment();
  r.tolerance = sigmas * bootstrap_second_moment_se(m, replicates, seed);
  r.pass = r.empirical <= r.theoretical + r.tolerance;
  r.constants = {{"C1", C1}, {"C2", C2}, {"M", r.theoretical}, {"samples", double(m.size())}};
  return r;
}

namespace {

std::size_t node_of(double t, double dt) {
  const double pos = t / dt;
  const double k = std::round(pos);
  if (t < 0.0 || std::abs(pos - k) > 1e-9 * std::max(1.0, pos)) {
    throw std::invalid_argument("snapshot time " + std::to_string(t) + " is not a grid node");
  }
  return static_cast<std::size_t>(k);
}

}  // namespace

EnsembleSnapshots snapshot_ensemble(const DriftSpec& spec, const PastHistory& initial,
                                    std::vector<double> times, double dt, std::uint64_t seed,
                                    std::size_t n, std::size_t threads) {
  if (n == 0) throw std::invalid_argument("snapshot_ensemble: ensemble size must be positive");
  if (times.empty()) throw std::invalid_argument("snapshot_ensemble: no times requested");
  std::sort(times.begin(), times.end());
  std::vector<std::size_t> nodes;
  for (double t : times) nodes.push_back(node_of(t, dt));
  const std::size_t d = spec.dimension;
  EnsembleSnapshots out;
  out.times = times;
  out.dimension = d;
  out.ensemble_size = n;
  out.values.assign(times.size(), std::vector<double>(n * d));
  parallel_for(n, threads, [&](std::size_t i) {
    const NoiseStream noise(seed, i, d);
    EulerMaruyama em(spec, initial);
    Vector dw(d);
    std::size_t k = 0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      for (; k < nodes[j]; ++k) {
        noise.increment(k, dt, dw);
        em.advance(dw);
      }
      const auto x = em.current();
      std::copy(x.begin(), x.end(), out.values[j].begin() + static_cast<long>(i * d));
    }
  });
  return out;
}

double increment_tail_bound(double z, double dt_gap, double C3, double M, std::size_t dimension) {
  const double dd = static_cast<double>(dimension);
  const double gap2 = dt_gap * dt_gap;
  return 16.0 * dd * (dd + 2.0) * gap2 / std::pow(z, 4) + 4.0 * C3 * C3 * M * gap2 / (z * z);
}

namespace {

BoundCheckReport tail_report(std::size_t exceed, std::size_t n, std::size_t d, double z, double t1,
                             double t2, double C3, double M) {
  BoundCheckReport r;
  r.bound_name = "increment_tail";
  r.theoretical = increment_tail_bound(z, t2 - t1, C3, M, d);
  r.empirical = static_cast<double>(exceed) / static_cast<double>(n);
  const double p = std::min(r.theoretical, 1.0);
  r.tolerance = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  r.pass = r.theoretical >= 1.0 || r.empirical <= r.theoretical + r.tolerance;
  r.constants = {{"z", z},   {"t1", t1}, {"t2", t2},       {"dt", t2 - t1},
                 {"C3", C3}, {"M", M},   {"samples", double(n)}};
  return r;
}

void check_tail_args(double z, double t1, double t2) {
  if (!(z > 0.0)) throw std::invalid_argument("increment_tail_check: z must be positive");
  if (!(t1 < t2)) throw std::invalid_argument("increment_tail_check: need t1 < t2");
}

}  // namespace

BoundCheckReport increment_tail_check(const EnsembleSnapshots& ensemble, double z, double t1,
                                      double t2, double C3, double M) {
  check_tail_args(z, t1, t2);
  if (ensemble.ensemble_size == 0) {
    throw std::invalid_argument("increment_tail_check: insufficient ensemble");
  }
  auto find = [&](double t) {
    for (std::size_t j = 0; j < ensemble.times.size(); ++j) {
      if (std::abs(ensemble.times[j] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return j;
    }
    throw std::invalid_argument("increment_tail_check: time not in the ensemble snapshots");
  };
  const std::size_t j1 = find(t1);
  const std::size_t j2 = find(t2);
  std::size_t exceed = 0;
  Vector diff(ensemble.dimension);
  for (std::size_t i = 0; i < ensemble.ensemble_size; ++i) {
    const auto a = ensemble.at(j1, i);
    const auto b = ensemble.at(j2, i);
    for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = b[c] - a[c];
    if (norm(diff) > z) ++exceed;
  }
  return tail_report(exceed, ensemble.ensemble_size, ensemble.dimension, z, t1, t2, C3, M);
}

BoundCheckReport increment_tail_check(std::span<const Trajectory> ensemble, double z, double t1,
                                      double t2, double C3, double M) {
  check_tail_args(z, t1, t2);
  if (ensemble.empty()) throw std::invalid_argument("increment_tail_check: insufficient ensemble");
  const std::size_t d = ensemble.front().dimension;
  std::size_t exceed = 0;
  Vector diff(d);
  for (const auto& traj : ensemble) {
    const std::size_t k1 = node_of(t1, traj.dt);
    const std::size_t k2 = node_of(t2, traj.dt);
    if (k2 > traj.steps) throw std::invalid_argument("increment_tail_check: t2 beyond horizon");
    const auto a = traj.x_at(k1);
    const auto b = traj.x_at(k2);
    for (std::size_t c = 0; c < d; ++c) diff[c] = b[c] - a[c];
    if (norm(diff) > z) ++exceed;
  }
  return tail_report(exceed, ensemble.size(), d, z, t1, t2, C3, M);
}

BoundCheckReport growth_diagnostic(std::span<const double> values, std::size_t dimension,
                                   double dt, const GrowthOptions& options) {
  if (dimension == 0 || values.size() % dimension != 0) {
    throw std::invalid_argument("growth_diagnostic: malformed path");
  }
  if (!(options.delta0 > 0.0 && options.delta0 < options.delta)) {
    throw std::invalid_argument("growth_diagnostic: need 0 < delta0 < delta");
  }
  const std::size_t nodes = values.size() / dimension;
  const double horizon = static_cast<double>(nodes - 1) * dt;
  const auto windows = static_cast<std::size_t>(std::floor(horizon + 1e-9));
  if (windows < 3) throw std::invalid_argument("growth_diagnostic: horizon shorter than 2 windows");
  const std::size_t n_windows = windows - 1;

  BoundCheckReport r;
  r.bound_name = "growth_windows";
  r.columns = {"n", "m_n", "bound", "ratio"};
  std::size_t violations = 0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t fit = 0;
  for (std::size_t n = 1; n <= n_windows; ++n) {
    const double lo = static_cast<double>(n);
    const auto k_lo = static_cast<std::size_t>(std::ceil(lo / dt - 1e-9));
    const auto k_hi = std::min(nodes - 1, static_cast<std::size_t>(std::floor((lo + 1.0) / dt + 1e-9)));
    double m = 0.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) m = std::max(m, norm(values.subspan(k * dimension, dimension)));
    const double bound = options.k_window * std::pow(lo, 0.5 + options.delta0);
    const double ratio = m / std::pow(lo, 0.5 + options.delta);
    if (m > bound) ++violations;
    r.rows.push_back({lo, m, bound, ratio});
    if (ratio > 0.0) {
      const double x = std::log(lo);
      const double y = std::log(ratio);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++fit;
    }
  }
  double slope = 0.0;
  if (fit >= 2) {
    const double fn = static_cast<double>(fit);
    slope = (fn * sxy - sx * sy) / (fn * sxx - sx * sx);
  }
  r.empirical = static_cast<double>(violations);
  r.theoretical = std::floor(options.allowed_fraction * static_cast<double>(n_windows));
  r.tolerance = 0.0;
  r.pass = r.empirical <= r.theoretical;
  r.constants = {{"delta", options.delta},
                 {"delta0", options.delta0},
                 {"K_window", options.k_window},
                 {"windows", double(n_windows)},
                 {"violations", double(violations)},
                 {"ratio_trend_slope", slope},
                 {"final_ratio", r.rows.back()[3]}};
  return r;
}

BoundCheckReport growth_diagnostic(const Trajectory& traj, const GrowthOptions& options) {
  return growth_diagnostic(traj.x, traj.dimension, traj.dt, options);
}

}  // namespace memsde
