// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails. Optional arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "../oracles.hpp"
#include "memsde/cli.hpp"
#include "memsde/girsanov.hpp"
#include "memsde/parallel.hpp"
#include "memsde/stationary.hpp"

using namespace memsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t threads() { return resolve_threads(0); }

Outcome ou_ground_truth() {
  const auto start = std::chrono::steady_clock::now();
  KbOptions opt;
  opt.threads = threads();
  const auto m = kb_average(DriftSpec::ou(0.5), 2000, 100.0, 0.01, 1, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double m2 = m.second_moment();
  return {std::abs(m2 - 1.0) <= 0.1 && secs < 60.0,
          fmt("E X^2 = %.4f (target 1.0 +- 0.1), %.1f s on %zu threads", m2, secs, opt.threads)};
}

Outcome lyapunov_lift() {
  // X' = -b X + kappa Y, Y' = lambda (X - Y) with Y = lambda int e^{lambda s} x(s) ds
  const double b = 1.0, kappa = 0.3, lambda = 1.0;
  KbOptions opt;
  opt.observable = Observable::state_and_memory;
  opt.threads = threads();
  const auto m = kb_average(DriftSpec::linear_delay(b, kappa, lambda), 4000, 200.0, 0.01, 2, opt);
  Eigen::MatrixXd A(2, 2), B = Eigen::MatrixXd::Zero(2, 2);
  A << -b, kappa, lambda, -lambda;
  B(0, 0) = 1.0;
  const Eigen::MatrixXd S = oracle::lyapunov(A, B);
  const auto cov = m.covariance();
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(cov[i * 2 + j] - S(i, j)) / std::abs(S(i, j)));
  }
  return {worst <= 0.10, fmt("cov = [%.4f %.4f %.4f] vs [%.4f %.4f %.4f], worst rel err %.3f", cov[0], cov[1],
                             cov[3], S(0, 0), S(0, 1), S(1, 1), worst)};
}

Outcome moment_bound_tightness() {
  KbOptions opt;
  opt.threads = threads();
  const auto md = DriftSpec::modulated_damping(1.0, 0.5, 1.0);
  const auto dc = declared_conditions(md);
  const auto r = moment_bound_check(kb_average(md, 2000, 100.0, 0.01, 3, opt), dc.C1, dc.C2, 3.0, 200, 3);
  const double ou = kb_average(DriftSpec::ou(1.0), 2000, 100.0, 0.01, 4, opt).second_moment();
  return {r.pass && r.theoretical == 1.0 && std::abs(ou - 0.5) <= 0.05,
          fmt("MD E X^2 = %.4f <= %.4f + %.4f; OU(b=1) E X^2 = %.4f (0.5 +- 0.05)", r.empirical, r.theoretical,
              r.tolerance, ou)};
}

Outcome increment_tails() {
  const auto md = DriftSpec::modulated_damping(1.0, 0.5, 1.0);
  const auto dc = declared_conditions(md);
  const double M = moment_bound(dc.C1, dc.C2);
  const double t1 = 10.0;
  const auto snaps = snapshot_ensemble(md, PastHistory::zero(0.01, 0, 1), {t1, t1 + 0.05, t1 + 0.1}, 0.01, 5,
                                       10000, threads());
  bool ok = true;
  double worst = 0.0;
  int cells = 0;
  for (double gap : {0.05, 0.1}) {
    for (double z : {0.5, 1.0, 2.0}) {
      const auto r = increment_tail_check(snaps, z, t1, t1 + gap, dc.C3, M);
      ok = ok && r.pass;
      worst = std::max(worst, r.empirical / (r.theoretical + r.tolerance));
      ++cells;
    }
  }
  return {ok, fmt("%d cells, worst frequency / (bound + 3 sigma) = %.4f", cells, worst)};
}

Outcome accumulators() {
  const double dt = 0.01;
  const std::size_t steps = 2000;
  const auto past = PastHistory::analytic(dt, 200, {{{0.4}, 0.0}, {{-0.2}, -0.3}});
  const std::vector<DriftSpec> families = {
      DriftSpec::ou(1.0), DriftSpec::modulated_damping(1.0, 0.5, 1.0), DriftSpec::linear_delay(1.0, 0.3, 2.0),
      DriftSpec::composite({DriftSpec::modulated_damping(1.0, 0.5, 0.7), DriftSpec::linear_delay(0.5, -0.4, 3.0)})};
  double worst = 0.0;
  bool ok = true;
  std::size_t checked = 0;
  for (std::size_t f = 0; f < families.size(); ++f) {
    auto h = past;
    h.reserve_window(h.window_size() + steps);
    // the built-in kernels plus both nonlinear transforms
    h.register_kernel(1.3, Transform::tanh);
    h.register_kernel(0.8, Transform::norm);
    EulerMaruyama em(families[f], std::move(h));
    const NoiseStream noise(6, f, 1);
    Vector dw(1);
    for (std::size_t k = 1; k <= steps; ++k) {
      noise.increment(k - 1, dt, dw);
      em.advance(dw);
      if (k % 100 != 0) continue;
      const auto& hist = em.history();
      const double tol = 10.0 * dt * dt * hist.window_span();
      for (const auto& acc : hist.accumulators()) {
        const auto want = oracle::kernel_integral(hist, acc.rate, acc.transform);
        const auto got = hist.kernel_integral(acc.rate, acc.transform);
        for (std::size_t c = 0; c < want.size(); ++c) {
          const double err = std::abs(got[c] - want[c]);
          worst = std::max(worst, err / tol);
          ok = ok && err <= tol;
          ++checked;
        }
      }
    }
  }
  return {ok && checked > 0, fmt("%zu comparisons, worst error / (10 dt^2 T_w) = %.3g", checked, worst)};
}

Outcome integrator_order() {
  const std::vector<double> dts = {0.04, 0.02, 0.01};
  std::string detail;
  bool ok = true;
  for (const auto& [name, spec] : {std::pair{"OU", DriftSpec::ou(1.0)},
                                   std::pair{"MD", DriftSpec::modulated_damping(1.0, 0.5, 1.0)}}) {
    std::vector<double> err;
    for (double dt : dts) err.push_back(oracle::strong_error(spec, 1.0, dt, 64, 400, 7));
    const double slope = oracle::loglog_slope(dts, err);
    ok = ok && slope >= 0.8 && slope <= 1.2;
    detail += fmt("%s slope %.3f; ", name, slope);
  }
  return {ok, detail + "target [0.8, 1.2]"};
}

// |x(s) - y(s)| = 0.1 e^{0.5 |s|}, both pasts ending at 0
struct SeparatedPasts {
  PastHistory x = PastHistory::zero(0.01, 0, 1);
  PastHistory y = PastHistory::analytic(0.01, 0, {{{-0.1}, 0.0}, {{0.1}, 0.5}});
  DriftSpec spec = DriftSpec::modulated_damping(1.0, 0.5, 1.0);
};

Outcome girsanov_bound() {
  const SeparatedPasts s;
  const double T = 5.0;
  const auto traj = simulate(s.spec, s.x, T, 0.01, 8);
  double R = 0.0;
  for (double v : traj.x) R = std::max(R, std::abs(v));
  const double K = domain_lipschitz(s.spec, 1.0, R, PathSamplerConfig{}, threads());
  const DiscrepancyBound bound{K, 0.1, 1.0, 0.5};
  const auto profile = drift_discrepancy(traj, s.x, s.y, s.spec, bound);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t k = 0; k < profile.times.size(); ++k) {
    ok = ok && profile.magnitude[k] <= profile.bound_at(k) * 1.01;
    worst = std::max(worst, profile.magnitude[k] / profile.bound_at(k));
  }
  const auto nov = novikov(profile, T);
  ok = ok && nov.novikov_truncated <= nov.novikov_bound + 1e-6;
  return {ok, fmt("K_hat = %.4f (R = %.3f), L = %.4g, worst |da| / envelope = %.3f, Novikov %.3g <= %.3g", K, R,
                  profile.L, worst, nov.novikov_truncated, nov.novikov_bound)};
}

Outcome martingale() {
  const SeparatedPasts s;
  const auto e = rn_density_ensemble(s.spec, s.x, s.y, 5.0, 0.01, 9, 10000, threads());
  return {e.all_finite && std::abs(e.mean - 1.0) <= 3.0 * e.standard_error,
          fmt("mean density %.5f +- %.5f over %zu paths", e.mean, e.standard_error, e.paths)};
}

Outcome coupling() {
  const auto p1 = PastHistory::analytic(0.01, 0, {{{1.0}, 0.0}});
  const auto p2 = PastHistory::analytic(0.01, 0, {{{-1.0}, 0.0}});
  const double b = 0.5;
  const auto ou = couple(DriftSpec::ou(b), p1, p2, 10.0, 0.01, 10);
  double worst = 0.0;
  for (std::size_t k = 0; k < ou.discrepancy.size(); ++k) {
    const double want = 2.0 * std::pow(1.0 - b * 0.01, static_cast<double>(k));
    worst = std::max(worst, std::abs(ou.discrepancy[k] - want) / want);
  }
  const auto md = DriftSpec::modulated_damping(1.0, 0.3, 1.0);
  const WindowFunctional F;
  const auto r = couple(md, p1, p2, 500.0, 0.01, 10, F);
  const double sd = calibrate_average_sd(md, p1, 500.0, 0.01, 10, 20, F, threads());
  return {worst <= 1e-12 && r.final_gap <= 2.0 * sd,
          fmt("OU worst rel err %.2e (<= 1e-12); MD gap %.3g <= 2 x sd %.3g", worst, r.final_gap, sd)};
}

Outcome growth() {
  const double dt = 0.01;
  const std::size_t seeds = 100;
  std::vector<std::size_t> violations(seeds);
  std::vector<std::size_t> windows(seeds);
  parallel_for(seeds, threads(), [&](std::size_t i) {
    const auto w = simulate(DriftSpec::zero(), PastHistory::zero(dt, 0, 1), 201.0, dt, 11, std::nullopt, i);
    const auto r = growth_diagnostic(w);
    violations[i] = static_cast<std::size_t>(r.empirical);
    windows[i] = static_cast<std::size_t>(r.constants.at("windows"));
  });
  std::size_t v = 0, n = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    v += violations[i];
    n += windows[i];
  }
  std::vector<double> e(2001);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = std::exp(static_cast<double>(k) * dt);
  const auto flagged = growth_diagnostic(e, 1, dt);
  const double frac = static_cast<double>(v) / static_cast<double>(n);
  return {frac <= 0.01 && n == 200 * seeds && !flagged.pass,
          fmt("Wiener violations %zu / %zu windows (%.4f); e^t flagged: %s", v, n, frac,
              flagged.pass ? "no" : "yes")};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    files[e.path().filename().string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  const std::string text = R"([drift]
family = modulated_damping
b = 1
epsilon = 0.5
lambda = 1
[sim]
T = 20
n = 400
seed = 12
[checks]
samples = 1000
tail_ensemble = 1000
t1 = 5
[girsanov]
y_past = sep
lambda_prime = 0.5
k_prime = 0.1
paths = 200
[coupling]
past_2 = sep
replicates = 4
[past.sep]
terms = -0.1, 0, 0.1, 0.5
)";
  const fs::path dir = fs::temp_directory_path() / "memsde_acceptance_determinism";
  fs::remove_all(dir);
  Overrides o;
  o.out = dir.string();
  const auto cfg = apply_overrides(parse_config(text), o);
  std::ostringstream log;
  std::size_t files = 0;
  std::string differing;
  for (const auto& command : subcommands()) {
    fs::remove_all(dir);
    run_command(command, cfg, text, o, 1, log);
    const auto one = snapshot(dir);
    for (std::size_t t : {2u, 4u}) {
      fs::remove_all(dir);
      run_command(command, cfg, text, o, t, log);
      if (snapshot(dir) != one) differing += command + " ";
    }
    files += one.size();
  }
  fs::remove_all(dir);
  return {differing.empty(), differing.empty()
                                 ? fmt("%zu subcommands, %zu artifacts identical for 1, 2 and 4 threads",
                                       subcommands().size(), files)
                                 : "differs: " + differing};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"ou_ground_truth", ou_ground_truth}, {"lyapunov_lift", lyapunov_lift},
      {"moment_bound", moment_bound_tightness}, {"increment_tails", increment_tails},
      {"accumulators", accumulators},         {"integrator_order", integrator_order},
      {"girsanov_bound", girsanov_bound},     {"martingale", martingale},
      {"coupling", coupling},                 {"growth_diagnostic", growth},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s %2d %-18s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
