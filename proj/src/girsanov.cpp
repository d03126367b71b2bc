#include "memsde/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memsde/parallel.hpp"

namespace memsde {

double DiscrepancyBound::L() const {
  if (!(rate_prime < rate)) {
    throw std::invalid_argument("discrepancy bound requires lambda' < lambda");
  }
  return K * K_prime / (rate - rate_prime);
}

double DiscrepancyProfile::bound_at(std::size_t k) const noexcept {
  return L * std::exp(-bound.rate * times[k]);
}

DiscrepancyProfile drift_discrepancy(const Trajectory& traj, const PastHistory& x_past,
                                     const PastHistory& y_past, const DriftSpec& spec,
                                     const DiscrepancyBound& bound) {
  const std::size_t d = spec.dimension;
  if (x_past.dimension() != d || y_past.dimension() != d || traj.dimension != d) {
    throw std::invalid_argument("drift_discrepancy: dimension mismatch");
  }
  if (x_past.grid_step() != y_past.grid_step() || x_past.grid_step() != traj.dt) {
    throw std::invalid_argument("drift_discrepancy: grid mismatch");
  }
  const auto x0 = x_past.current();
  const auto y0 = y_past.current();
  for (std::size_t c = 0; c < d; ++c) {
    if (x0[c] != y0[c]) {
      throw std::invalid_argument("drift_discrepancy: pasts must share the endpoint x(0) = y(0)");
    }
    if (traj.x[c] != x0[c]) {
      throw std::invalid_argument("drift_discrepancy: trajectory does not start from x_past");
    }
  }

  DiscrepancyProfile p;
  p.dt = traj.dt;
  p.dimension = d;
  p.bound = bound;
  p.L = bound.L();
  p.times.resize(traj.steps + 1);
  p.magnitude.resize(traj.steps + 1);
  p.delta.resize((traj.steps + 1) * d);

  PastHistory hx = x_past;
  PastHistory hy = y_past;
  register_kernels(spec, hx);
  register_kernels(spec, hy);
  Vector ax(d);
  Vector ay(d);
  for (std::size_t k = 0; k <= traj.steps; ++k) {
    evaluate_into(spec, hx, ax);
    evaluate_into(spec, hy, ay);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = ay[c] - ax[c];
      p.delta[k * d + c] = diff;
      sq += diff * diff;
    }
    p.times[k] = traj.time(k);
    p.magnitude[k] = std::sqrt(sq);
    if (k < traj.steps) {
      hx.push(traj.dt, traj.x_at(k + 1));
      hy.push(traj.dt, traj.x_at(k + 1));
    }
  }
  return p;
}

double domain_lipschitz(const DriftSpec& spec, double rate, double radius,
                        const PathSamplerConfig& sampler, std::size_t threads) {
  PathSamplerConfig cfg = sampler;
  cfg.pool_radius = radius;
  return *estimate_lipschitz(spec, rate, cfg, radius, threads).K_hat;
}

GirsanovReport novikov(const DiscrepancyProfile& profile, double horizon) {
  if (profile.times.empty()) throw std::invalid_argument("novikov: empty profile");
  GirsanovReport r;
  r.horizon = horizon;
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < profile.times.size() && profile.times[k + 1] <= horizon + 1e-12; ++k) {
    const double a = profile.magnitude[k];
    const double b = profile.magnitude[k + 1];
    integral += 0.5 * profile.dt * (a * a + b * b);
  }
  r.novikov_truncated = 0.5 * integral;
  const double lambda = profile.bound.rate;
  r.novikov_bound = profile.L * profile.L / (4.0 * lambda);
  r.novikov_tail_bound = r.novikov_bound * std::exp(-2.0 * lambda * horizon);
  r.novikov_integral = r.novikov_truncated + r.novikov_tail_bound;
  r.novikov_finite = std::isfinite(r.novikov_integral);
  return r;
}

double log_rn_density(std::span<const double> delta, std::span<const double> increments,
                      std::size_t dimension, double dt) {
  if (increments.size() > delta.size() || increments.size() % dimension != 0) {
    throw std::invalid_argument("rn_density: discrepancy and increments have mismatched lengths");
  }
  double stochastic = 0.0;
  double quadratic = 0.0;
  for (std::size_t i = 0; i < increments.size(); ++i) {
    stochastic += delta[i] * increments[i];
    quadratic += delta[i] * delta[i];
  }
  return stochastic - 0.5 * quadratic * dt;
}

GirsanovReport rn_density(const Trajectory& traj, const DiscrepancyProfile& profile,
                          GirsanovReport report) {
  if (profile.times.size() != traj.steps + 1 || profile.dimension != traj.dimension) {
    throw std::invalid_argument("rn_density: profile and trajectory lengths differ");
  }
  const double log_density = log_rn_density(profile.delta, traj.dw, traj.dimension, traj.dt);
  report.log_rn_density = log_density;
  report.rn_density = std::exp(log_density);
  return report;
}

DensityEnsemble rn_density_ensemble(const DriftSpec& spec, const PastHistory& x_past,
                                    const PastHistory& y_past, double T, double dt,
                                    std::uint64_t seed, std::size_t n, std::size_t threads) {
  if (n < 2) throw std::invalid_argument("rn_density_ensemble: need at least two paths");
  std::vector<double> density(n);
  const DiscrepancyBound unused{0.0, 0.0, 1.0, 0.0};
  parallel_for(n, threads, [&](std::size_t i) {
    const Trajectory traj = simulate(spec, x_past, T, dt, seed, std::nullopt, i);
    const auto profile = drift_discrepancy(traj, x_past, y_past, spec, unused);
    density[i] = std::exp(log_rn_density(profile.delta, traj.dw, traj.dimension, traj.dt));
  });
  DensityEnsemble out;
  out.paths = n;
  out.mean = pairwise_sum(density) / static_cast<double>(n);
  out.min_density = *std::min_element(density.begin(), density.end());
  out.all_finite = std::all_of(density.begin(), density.end(),
                               [](double v) { return std::isfinite(v) && v > 0.0; });
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = (density[i] - out.mean) * (density[i] - out.mean);
  out.standard_error = std::sqrt(pairwise_sum(dev) / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

std::vector<double> window_functional_values(const Trajectory& traj, const WindowFunctional& F) {
  if (!(F.window > 0.0) || !(F.bound > 0.0)) {
    throw std::invalid_argument("window functional: window and bound must be positive");
  }
  if (F.coordinate >= traj.dimension) throw std::invalid_argument("window functional: bad coordinate");
  const auto s = static_cast<std::size_t>(std::llround(F.window / traj.dt));
  if (s == 0 || s > traj.steps) {
    throw std::invalid_argument("window functional: window must fit inside the horizon");
  }
  std::vector<double> prefix(traj.steps + 1, 0.0);
  for (std::size_t k = 0; k < traj.steps; ++k) {
    const double a = traj.x[k * traj.dimension + F.coordinate];
    const double b = traj.x[(k + 1) * traj.dimension + F.coordinate];
    prefix[k + 1] = prefix[k] + 0.5 * traj.dt * (a + b);
  }
  const double span = static_cast<double>(s) * traj.dt;
  std::vector<double> values(traj.steps - s + 1);
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = std::clamp((prefix[k + s] - prefix[k]) / span, -F.bound, F.bound);
  }
  return values;
}

double ergodic_average(const Trajectory& traj, const WindowFunctional& F) {
  const auto values = window_functional_values(traj, F);
  return pairwise_sum(values) / static_cast<double>(values.size());
}

CouplingReport couple(const DriftSpec& spec, const PastHistory& past1, const PastHistory& past2,
                      double T, double dt, std::uint64_t seed, const WindowFunctional& F) {
  if (past1.grid_step() != past2.grid_step() || past1.dimension() != past2.dimension()) {
    throw std::invalid_argument("couple: pasts do not share a grid");
  }
  CouplingReport r;
  r.functional = F;
  r.first = simulate(spec, past1, T, dt, seed, std::nullopt, 0);
  r.second = simulate(spec, past2, T, dt, seed, std::nullopt, 0);
  const std::size_t d = spec.dimension;
  r.times.resize(r.first.steps + 1);
  r.discrepancy.resize(r.first.steps + 1);
  Vector diff(d);
  for (std::size_t k = 0; k <= r.first.steps; ++k) {
    const auto a = r.first.x_at(k);
    const auto b = r.second.x_at(k);
    for (std::size_t c = 0; c < d; ++c) diff[c] = a[c] - b[c];
    r.times[k] = r.first.time(k);
    r.discrepancy[k] = norm(diff);
  }
  const auto f1 = window_functional_values(r.first, F);
  const auto f2 = window_functional_values(r.second, F);
  r.average1.resize(f1.size());
  r.average2.resize(f2.size());
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t k = 0; k < f1.size(); ++k) {
    s1 += f1[k];
    s2 += f2[k];
    r.average1[k] = s1 / static_cast<double>(k + 1);
    r.average2[k] = s2 / static_cast<double>(k + 1);
  }
  r.final_average1 = pairwise_sum(f1) / static_cast<double>(f1.size());
  r.final_average2 = pairwise_sum(f2) / static_cast<double>(f2.size());
  r.final_gap = std::abs(r.final_average1 - r.final_average2);
  return r;
}

double calibrate_average_sd(const DriftSpec& spec, const PastHistory& past, double T, double dt,
                            std::uint64_t seed, std::size_t replicates, const WindowFunctional& F,
                            std::size_t threads) {
  if (replicates < 2) throw std::invalid_argument("calibrate_average_sd: need two replicates");
  std::vector<double> averages(replicates);
  parallel_for(replicates, threads, [&](std::size_t i) {
    averages[i] = ergodic_average(simulate(spec, past, T, dt, seed, std::nullopt, i + 1), F);
  });
  const double mean = pairwise_sum(averages) / static_cast<double>(replicates);
  for (auto& a : averages) a = (a - mean) * (a - mean);
  return std::sqrt(pairwise_sum(averages) / static_cast<double>(replicates - 1));
}

}  // namespace memsde
