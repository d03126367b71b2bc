#include "memsde/drift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "memsde/parallel.hpp"
#include "memsde/rng.hpp"

namespace memsde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string fmt_param(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double direction_component(const DriftSpec& spec, std::size_t c) {
  if (spec.direction.empty()) return c == 0 ? 1.0 : 0.0;
  return spec.direction[c];
}

void add_drift(const DriftSpec& spec, const DriftSpec& root, const PastHistory& h,
               std::span<double> out) {
  const auto x0 = h.current();
  const std::size_t d = x0.size();
  std::visit(
      overloaded{
          [&](const OrnsteinUhlenbeck& f) {
            for (std::size_t c = 0; c < d; ++c) out[c] -= f.b * x0[c];
          },
          [&](const ModulatedDamping& f) {
            const auto memory = h.kernel_integral(f.rate, Transform::identity);
            double projected = 0.0;
            for (std::size_t c = 0; c < d; ++c) projected += direction_component(root, c) * memory[c];
            const double m = f.rate * projected;
            const double factor = -f.b * (1.0 + f.epsilon * std::tanh(m));
            for (std::size_t c = 0; c < d; ++c) out[c] += factor * x0[c];
          },
          [&](const LinearDistributedDelay& f) {
            const auto memory = h.kernel_integral(f.rate, Transform::identity);
            for (std::size_t c = 0; c < d; ++c) {
              out[c] += -f.b * x0[c] + f.kappa * f.rate * memory[c];
            }
          },
          [&](const Composite& f) {
            for (const auto& part : f.parts) add_drift(part, root, h, out);
          },
      },
      spec.family);
}

void collect_kernels(const DriftSpec& spec, std::vector<KernelKey>& out) {
  auto add = [&](double rate) {
    const KernelKey key{rate, Transform::identity};
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  };
  std::visit(overloaded{
                 [](const OrnsteinUhlenbeck&) {},
                 [&](const ModulatedDamping& f) { add(f.rate); },
                 [&](const LinearDistributedDelay& f) { add(f.rate); },
                 [&](const Composite& f) {
                   for (const auto& part : f.parts) collect_kernels(part, out);
                 },
             },
             spec.family);
}

void collect_features(const DriftSpec& spec, const DriftSpec& root, const PastHistory& h,
                      Vector& out) {
  const std::size_t d = h.dimension();
  std::visit(overloaded{
                 [](const OrnsteinUhlenbeck&) {},
                 [&](const ModulatedDamping& f) {
                   const auto memory = h.kernel_integral(f.rate, Transform::identity);
                   double projected = 0.0;
                   for (std::size_t c = 0; c < d; ++c) {
                     projected += direction_component(root, c) * memory[c];
                   }
                   out.push_back(f.rate * projected);
                 },
                 [&](const LinearDistributedDelay& f) {
                   const auto memory = h.kernel_integral(f.rate, Transform::identity);
                   for (std::size_t c = 0; c < d; ++c) out.push_back(f.rate * memory[c]);
                 },
                 [&](const Composite& f) {
                   for (const auto& part : f.parts) collect_features(part, root, h, out);
                 },
             },
             spec.family);
}

}  // namespace

DriftSpec DriftSpec::ou(double b, std::size_t d) {
  DriftSpec s{OrnsteinUhlenbeck{b}, d, {}};
  s.validate();
  return s;
}

DriftSpec DriftSpec::modulated_damping(double b, double epsilon, double rate, std::size_t d) {
  DriftSpec s{ModulatedDamping{b, epsilon, rate}, d, {}};
  s.validate();
  return s;
}

DriftSpec DriftSpec::linear_delay(double b, double kappa, double rate, std::size_t d) {
  DriftSpec s{LinearDistributedDelay{b, kappa, rate}, d, {}};
  s.validate();
  return s;
}

DriftSpec DriftSpec::composite(std::vector<DriftSpec> parts, std::size_t d) {
  DriftSpec s{Composite{std::move(parts)}, d, {}};
  s.validate();
  return s;
}

void DriftSpec::validate() const {
  if (dimension == 0) throw std::invalid_argument("drift dimension must be at least 1");
  if (!direction.empty()) {
    if (direction.size() != dimension) throw std::invalid_argument("drift direction has wrong size");
    if (std::abs(norm(direction) - 1.0) > 1e-12) {
      throw std::invalid_argument("drift direction must be a unit vector");
    }
  }
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " must be positive");
    }
  };
  std::visit(overloaded{
                 [&](const OrnsteinUhlenbeck& f) { positive(f.b, "OU b"); },
                 [&](const ModulatedDamping& f) {
                   positive(f.b, "modulated damping b");
                   positive(f.rate, "modulated damping lambda");
                   if (!(f.epsilon >= 0.0 && f.epsilon < 1.0)) {
                     throw std::invalid_argument("modulated damping epsilon must lie in [0, 1)");
                   }
                 },
                 [&](const LinearDistributedDelay& f) {
                   positive(f.b, "distributed delay b");
                   positive(f.rate, "distributed delay lambda");
                   if (!std::isfinite(f.kappa)) throw std::invalid_argument("kappa must be finite");
                 },
                 [&](const Composite& f) {
                   for (const auto& part : f.parts) {
                     if (part.dimension != dimension) {
                       throw std::invalid_argument("composite parts must share the dimension");
                     }
                     part.validate();
                   }
                 },
             },
             family);
}

std::string DriftSpec::id() const {
  return std::visit(
      overloaded{
          [](const OrnsteinUhlenbeck& f) { return "ou(b=" + fmt_param(f.b) + ")"; },
          [](const ModulatedDamping& f) {
            return "modulated_damping(b=" + fmt_param(f.b) + ",epsilon=" + fmt_param(f.epsilon) +
                   ",lambda=" + fmt_param(f.rate) + ")";
          },
          [](const LinearDistributedDelay& f) {
            return "linear_distributed_delay(b=" + fmt_param(f.b) + ",kappa=" +
                   fmt_param(f.kappa) + ",lambda=" + fmt_param(f.rate) + ")";
          },
          [](const Composite& f) {
            std::string out = "composite[";
            for (std::size_t i = 0; i < f.parts.size(); ++i) {
              if (i) out += "+";
              out += f.parts[i].id();
            }
            return out + "]";
          },
      },
      family) + "/d=" + std::to_string(dimension);
}

std::vector<KernelKey> required_kernels(const DriftSpec& spec) {
  std::vector<KernelKey> out;
  collect_kernels(spec, out);
  return out;
}

void register_kernels(const DriftSpec& spec, PastHistory& h) {
  for (const auto& key : required_kernels(spec)) h.register_kernel(key.rate, key.transform);
}

void evaluate_into(const DriftSpec& spec, const PastHistory& h, std::span<double> out) {
  if (h.dimension() != spec.dimension || out.size() != spec.dimension) {
    throw std::invalid_argument("evaluate: dimension mismatch between drift and history");
  }
  std::fill(out.begin(), out.end(), 0.0);
  add_drift(spec, spec, h, out);
}

Vector evaluate(const DriftSpec& spec, const PastHistory& h) {
  Vector out(spec.dimension);
  evaluate_into(spec, h, out);
  return out;
}

Vector memory_features(const DriftSpec& spec, const PastHistory& h) {
  Vector out;
  collect_features(spec, spec, h, out);
  return out;
}

DeclaredConditions declared_conditions(const DriftSpec& spec) {
  return std::visit(
      overloaded{
          [](const OrnsteinUhlenbeck& f) {
            DeclaredConditions c;
            c.lipschitz = true;
            c.dissipative = true;
            c.C2 = f.b;
            c.linear_growth = true;
            c.C3 = f.b;
            return c;
          },
          [](const ModulatedDamping& f) {
            // |tanh M1 - tanh M2| <= |M1 - M2| gives K(R) = b eps lambda R.
            DeclaredConditions c;
            c.lipschitz = true;
            c.K_slope = f.b * f.epsilon * f.rate;
            c.dissipative = true;
            c.C2 = f.b * (1.0 - f.epsilon);
            c.linear_growth = true;
            c.C3 = f.b * (1.0 + f.epsilon);
            return c;
          },
          [](const LinearDistributedDelay& f) {
            DeclaredConditions c;
            c.lipschitz = true;
            c.K_constant = std::abs(f.kappa) * f.rate;
            c.dissipative = f.kappa == 0.0;
            c.C2 = f.kappa == 0.0 ? f.b : 0.0;
            c.linear_growth = f.kappa == 0.0;
            c.C3 = f.kappa == 0.0 ? f.b : 0.0;
            return c;
          },
          [](const Composite& f) {
            DeclaredConditions c;
            c.lipschitz = c.dissipative = c.linear_growth = true;
            for (const auto& part : f.parts) {
              const auto p = declared_conditions(part);
              c.lipschitz = c.lipschitz && p.lipschitz;
              c.K_constant += p.K_constant;
              c.K_slope += p.K_slope;
              c.dissipative = c.dissipative && p.dissipative;
              c.C1 += p.C1;
              c.C2 += p.C2;
              c.linear_growth = c.linear_growth && p.linear_growth;
              c.C3 += p.C3;
            }
            // The zero drift is not dissipative (C2 > 0 is required).
            if (f.parts.empty()) c.dissipative = false;
            return c;
          },
      },
      spec.family);
}

namespace {

Vector random_direction(CounterRng& rng, std::size_t d) {
  Vector v(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (auto& c : v) c = rng.normal();
    n = norm(v);
  }
  for (auto& c : v) c /= n;
  return v;
}

// Perturbation g with g(0) = 0, evaluated on window times s_i = -(W - i) dt.
std::vector<Vector> random_perturbation(CounterRng& rng, const PathSamplerConfig& cfg,
                                        std::size_t d, bool fourier) {
  const std::size_t n = cfg.window_steps + 1;
  std::vector<Vector> g(n, Vector(d, 0.0));
  auto time_of = [&](std::size_t i) {
    return -static_cast<double>(cfg.window_steps - i) * cfg.grid_step;
  };
  if (fourier) {
    const std::size_t modes = std::max<std::size_t>(cfg.fourier_modes, 1);
    for (std::size_t k = 0; k < modes; ++k) {
      Vector amp(d);
      for (auto& a : amp) a = cfg.perturbation_scale * rng.normal() / static_cast<double>(modes);
      const double omega = rng.uniform(0.2, 3.0);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double base = std::sin(phase);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = time_of(i);
        const double f = (std::sin(omega * s + phase) - base) * std::exp(cfg.envelope_rate * s);
        for (std::size_t c = 0; c < d; ++c) g[i][c] += amp[c] * f;
      }
    }
  } else {
    Vector offset(d);
    for (auto& a : offset) a = cfg.perturbation_scale * rng.normal();
    const double beta = rng.uniform(0.2, 2.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = 1.0 - std::exp(beta * time_of(i));
      for (std::size_t c = 0; c < d; ++c) g[i][c] = offset[c] * f;
    }
  }
  return g;
}

Vector sample_endpoint(CounterRng& rng, const PathSamplerConfig& cfg, std::size_t d) {
  const bool zero_endpoint = rng.uniform() < cfg.zero_endpoint_fraction;
  const Vector dir = random_direction(rng, d);
  const double radius = cfg.pool_radius * rng.uniform();
  Vector e(d, 0.0);
  if (!zero_endpoint) {
    for (std::size_t c = 0; c < d; ++c) e[c] = radius * dir[c];
  }
  return e;
}

std::vector<Vector> build_window(const PathSamplerConfig& cfg, const Vector& endpoint,
                                 CounterRng& rng, std::size_t d) {
  const double kind = rng.uniform();
  std::vector<Vector> w(cfg.window_steps + 1, endpoint);
  if (kind < cfg.constant_fraction) return w;
  const bool fourier = kind < cfg.constant_fraction + 0.5 * (1.0 - cfg.constant_fraction);
  const auto g = random_perturbation(rng, cfg, d, fourier);
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) w[i][c] += g[i][c];
  }
  w.back() = endpoint;
  return w;
}

void check_sampler(const PathSamplerConfig& cfg) {
  if (cfg.samples == 0) throw std::invalid_argument("sampler: samples must be positive");
  if (!(cfg.grid_step > 0.0)) throw std::invalid_argument("sampler: grid_step must be positive");
  if (!(cfg.pool_radius >= 0.0)) throw std::invalid_argument("sampler: pool_radius must be >= 0");
}

}  // namespace

PastHistory sample_past(const PathSamplerConfig& cfg, std::size_t index, std::size_t dimension) {
  CounterRng rng(cfg.seed, stream_id(StreamDomain::path_sampler, 2 * index));
  const Vector e = sample_endpoint(rng, cfg, dimension);
  return PastHistory::sampled(cfg.grid_step, build_window(cfg, e, rng, dimension));
}

std::pair<PastHistory, PastHistory> sample_past_pair(const PathSamplerConfig& cfg,
                                                     std::size_t index, std::size_t dimension) {
  CounterRng rng(cfg.seed, stream_id(StreamDomain::path_sampler, 2 * index));
  const Vector e = sample_endpoint(rng, cfg, dimension);
  auto x_window = build_window(cfg, e, rng, dimension);

  CounterRng partner(cfg.seed, stream_id(StreamDomain::path_sampler, 2 * index + 1));
  std::vector<Vector> y_window;
  if (partner.uniform() < 0.5) {
    // Sign-constant perturbation along one direction: the kernel-weighted
    // difference then reaches the Lipschitz ratio of linear memory terms.
    const Vector dir = random_direction(partner, dimension);
    const double scale = cfg.perturbation_scale * std::pow(10.0, partner.uniform(-3.0, 0.0));
    const double beta = partner.uniform(0.2, 5.0);
    y_window = x_window;
    for (std::size_t i = 0; i < y_window.size(); ++i) {
      const double s = -static_cast<double>(cfg.window_steps - i) * cfg.grid_step;
      const double f = scale * (1.0 - std::exp(beta * s));
      for (std::size_t c = 0; c < dimension; ++c) y_window[i][c] += f * dir[c];
    }
    y_window.back() = e;
  } else {
    y_window = build_window(cfg, e, partner, dimension);
  }
  return {PastHistory::sampled(cfg.grid_step, std::move(x_window)),
          PastHistory::sampled(cfg.grid_step, std::move(y_window))};
}

namespace {

struct PairOutcome {
  bool used = false;
  bool violation = false;
  double ratio = 0.0;
};

PairOutcome lipschitz_outcome(const DriftSpec& spec, double rate, PastHistory x, PastHistory y) {
  PairOutcome out;
  register_kernels(spec, x);
  register_kernels(spec, y);
  const Vector ax = evaluate(spec, x);
  const Vector ay = evaluate(spec, y);
  double num_sq = 0.0;
  for (std::size_t c = 0; c < ax.size(); ++c) num_sq += (ax[c] - ay[c]) * (ax[c] - ay[c]);
  const double numerator = std::sqrt(num_sq);

  std::vector<Vector> diff = x.window();
  const auto yw = y.window();
  for (std::size_t i = 0; i < diff.size(); ++i) {
    for (std::size_t c = 0; c < diff[i].size(); ++c) diff[i][c] -= yw[i][c];
  }
  PastHistory dh = PastHistory::sampled(x.grid_step(), std::move(diff));
  dh.register_kernel(rate, Transform::norm);
  const double denominator = dh.kernel_integral(rate, Transform::norm)[0];

  out.used = true;
  if (denominator == 0.0) {
    if (numerator == 0.0) {
      out.used = false;
    } else {
      out.violation = true;
    }
    return out;
  }
  out.ratio = numerator / denominator;
  return out;
}

}  // namespace

double lipschitz_ratio(const DriftSpec& spec, double rate, double grid_step, const Witness& w) {
  const auto o = lipschitz_outcome(spec, rate, PastHistory::sampled(grid_step, w.x_window),
                                   PastHistory::sampled(grid_step, w.y_window));
  return o.ratio;
}

ConditionReport estimate_lipschitz(const DriftSpec& spec, double rate,
                                   const PathSamplerConfig& sampler, double domain_bound,
                                   std::size_t threads) {
  spec.validate();
  check_sampler(sampler);
  if (!(rate > 0.0)) throw std::invalid_argument("estimate_lipschitz: rate must be positive");
  std::vector<PairOutcome> outcomes(sampler.samples);
  parallel_for(sampler.samples, threads, [&](std::size_t i) {
    auto [x, y] = sample_past_pair(sampler, i, spec.dimension);
    for (std::size_t c = 0; c < spec.dimension; ++c) {
      if (x.current()[c] != y.current()[c]) {
        throw std::logic_error("estimate_lipschitz: sampler produced unequal endpoints");
      }
    }
    if (norm(x.current()) > domain_bound) return;
    outcomes[i] = lipschitz_outcome(spec, rate, std::move(x), std::move(y));
  });

  ConditionReport report;
  report.drift_id = spec.id();
  report.domain_bound = domain_bound;
  report.samples_drawn = sampler.samples;
  report.kernel_rate = rate;
  report.grid_step = sampler.grid_step;
  double best = 0.0;
  std::optional<std::size_t> best_index;
  std::optional<std::size_t> violation_index;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.violation && !violation_index) violation_index = i;
    if (!o.used || o.violation) continue;
    ++report.samples_used;
    if (!best_index || o.ratio > best) {
      best = o.ratio;
      best_index = i;
    }
  }
  report.K_hat = best;
  auto make_witness = [&](std::size_t i, const std::string& note) {
    auto [x, y] = sample_past_pair(sampler, i, spec.dimension);
    Witness w;
    w.index = i;
    w.x_window = x.window();
    w.y_window = y.window();
    w.ratio = outcomes[i].ratio;
    w.note = note;
    return w;
  };
  if (best_index) report.witnesses.push_back(make_witness(*best_index, "max ratio"));
  if (violation_index) {
    report.violations.push_back("lipschitz: drift differs on a pair with zero kernel distance");
    report.witnesses.push_back(make_witness(*violation_index, "zero kernel distance"));
  }
  return report;
}

namespace {

struct PointOutcome {
  bool in_domain = false;
  double endpoint_norm = 0.0;
  double inner = 0.0;   // (a, x(0))
  double drift_norm = 0.0;
};

PointOutcome point_outcome(const DriftSpec& spec, const PathSamplerConfig& sampler, std::size_t i,
                           double domain_bound) {
  PointOutcome out;
  PastHistory h = sample_past(sampler, i, spec.dimension);
  out.endpoint_norm = norm(h.current());
  if (out.endpoint_norm > domain_bound) return out;
  out.in_domain = true;
  register_kernels(spec, h);
  const Vector a = evaluate(spec, h);
  out.inner = dot(a, h.current());
  out.drift_norm = norm(a);
  return out;
}

Witness point_witness(const DriftSpec& spec, const PathSamplerConfig& sampler, std::size_t i,
                      double ratio, std::string note) {
  Witness w;
  w.index = i;
  w.x_window = sample_past(sampler, i, spec.dimension).window();
  w.ratio = ratio;
  w.note = std::move(note);
  return w;
}

}  // namespace

ConditionReport estimate_dissipativity(const DriftSpec& spec, const PathSamplerConfig& sampler,
                                       double domain_bound, double shell_fraction,
                                       std::size_t threads) {
  spec.validate();
  check_sampler(sampler);
  std::vector<PointOutcome> outcomes(sampler.samples);
  parallel_for(sampler.samples, threads, [&](std::size_t i) {
    outcomes[i] = point_outcome(spec, sampler, i, domain_bound);
  });

  ConditionReport report;
  report.drift_id = spec.id();
  report.domain_bound = domain_bound;
  report.samples_drawn = sampler.samples;
  report.grid_step = sampler.grid_step;

  const double shell = shell_fraction * domain_bound;
  std::optional<double> c2;
  std::size_t c2_index = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.in_domain) continue;
    ++report.samples_used;
    if (o.endpoint_norm < shell || o.endpoint_norm == 0.0) continue;
    const double q = o.endpoint_norm * o.endpoint_norm;
    const double candidate = -o.inner / q;
    if (!c2 || candidate < *c2) {
      c2 = candidate;
      c2_index = i;
    }
  }
  if (!c2) {
    report.violations.push_back("dissipativity: no samples on the outer shell");
    return report;
  }
  report.C2_hat = *c2;
  const double c2_used = std::max(*c2, 0.0);
  double c1 = 0.0;
  for (const auto& o : outcomes) {
    if (!o.in_domain) continue;
    c1 = std::max(c1, o.inner + c2_used * o.endpoint_norm * o.endpoint_norm);
  }
  report.C1_hat = c1;
  report.witnesses.push_back(point_witness(spec, sampler, c2_index, *c2, "binding C2 sample"));
  if (!(*c2 > 0.0)) {
    report.violations.push_back("dissipativity: no C2 > 0 fits the sampled pasts");
  }
  return report;
}

ConditionReport estimate_growth(const DriftSpec& spec, const PathSamplerConfig& sampler,
                                double domain_bound, std::size_t threads) {
  spec.validate();
  check_sampler(sampler);
  std::vector<PointOutcome> outcomes(sampler.samples);
  parallel_for(sampler.samples, threads, [&](std::size_t i) {
    outcomes[i] = point_outcome(spec, sampler, i, domain_bound);
  });

  ConditionReport report;
  report.drift_id = spec.id();
  report.domain_bound = domain_bound;
  report.samples_drawn = sampler.samples;
  report.grid_step = sampler.grid_step;

  double c3 = 0.0;
  std::optional<std::size_t> best_index;
  std::optional<std::size_t> violation_index;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.in_domain) continue;
    ++report.samples_used;
    if (o.endpoint_norm == 0.0) {
      if (o.drift_norm != 0.0 && !violation_index) violation_index = i;
      continue;
    }
    const double ratio = o.drift_norm / o.endpoint_norm;
    if (!best_index || ratio > c3) {
      c3 = ratio;
      best_index = i;
    }
  }
  report.C3_hat = c3;
  if (best_index) report.witnesses.push_back(point_witness(spec, sampler, *best_index, c3, "max ratio"));
  if (violation_index) {
    report.violations.push_back("growth: nonzero drift at x(0) = 0");
    report.witnesses.push_back(point_witness(spec, sampler, *violation_index,
                                             outcomes[*violation_index].drift_norm,
                                             "zero endpoint, |a| recorded"));
  }
  return report;
}

}  // namespace memsde
