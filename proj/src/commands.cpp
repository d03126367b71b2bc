#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "memsde/cli.hpp"
#include "memsde/girsanov.hpp"
#include "memsde/serialize.hpp"
#include "memsde/stationary.hpp"

namespace fs = std::filesystem;

namespace memsde {

namespace {

constexpr int kFormatVersion = 1;

class OutputDir {
 public:
  OutputDir(const RunConfig& cfg) : cfg_(cfg), root_(cfg.output.directory) {
    fs::create_directories(root_);
  }

  void write(const std::string& name, const std::string& format, const std::string& content) {
    if (!cfg_.emits(format)) return;
    write_always(name, content);
  }

  void write_always(const std::string& name, const std::string& content) {
    const fs::path p = root_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed for " + p.string());
    emitted_.push_back(name);
  }

  const fs::path& root() const noexcept { return root_; }
  const std::vector<std::string>& emitted() const noexcept { return emitted_; }

 private:
  const RunConfig& cfg_;
  fs::path root_;
  std::vector<std::string> emitted_;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_manifest(OutputDir& out, const std::string& command, const RunConfig& cfg,
                    const std::string& config_text, const Overrides& o, int exit_code) {
  Json overrides = Json::object();
  if (o.seed) overrides["seed"] = *o.seed;
  if (o.T) overrides["T"] = *o.T;
  if (o.dt) overrides["dt"] = *o.dt;
  if (o.n) overrides["n"] = *o.n;
  if (o.out) overrides["out"] = *o.out;

  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(out.root())) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), out.root()).generic_string();
    if (rel != "manifest.json") names.push_back(rel);
  }
  std::sort(names.begin(), names.end());
  Json files = Json::array();
  const auto& emitted = out.emitted();
  for (const auto& name : names) {
    const std::string content = read_file(out.root() / name);
    const bool ours = std::find(emitted.begin(), emitted.end(), name) != emitted.end();
    files.push_back({{"name", name},
                     {"sha256", sha256_hex(content)},
                     {"bytes", content.size()},
                     {"format_version", ours ? Json(kFormatVersion) : Json(nullptr)},
                     {"emitted", ours}});
  }
  const Json manifest = {{"command", command},
                         {"config_sha256", sha256_hex(config_text)},
                         {"resolved_config_sha256", sha256_hex(serialize_config(cfg))},
                         {"seed", cfg.sim.seed},
                         {"overrides", overrides},
                         {"exit_code", exit_code},
                         {"memsde_version", kVersion},
                         {"files", files}};
  out.write_always("manifest.json", dump(manifest));
}

PathSamplerConfig sampler_of(const RunConfig& cfg) {
  PathSamplerConfig s;
  s.samples = cfg.checks.samples;
  s.pool_radius = cfg.checks.domain_bound;
  s.seed = cfg.checks.sampler_seed;
  return s;
}

double kernel_rate_or_one(const RunConfig& cfg) { return drift_rate(cfg).value_or(1.0); }

Json verdicts(const std::vector<BoundCheckReport>& reports) {
  Json a = Json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a;
}

bool all_pass(const std::vector<BoundCheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
}

void log_reports(std::ostream& log, const std::vector<BoundCheckReport>& reports) {
  for (const auto& r : reports) {
    log << (r.pass ? "PASS " : "FAIL ") << r.bound_name << ": empirical "
        << format_double(r.empirical) << " vs " << format_double(r.theoretical) << " (+"
        << format_double(r.tolerance) << ")\n";
  }
}

double path_sup(const Trajectory& t) {
  double r = 0.0;
  for (std::size_t k = 0; k <= t.steps; ++k) r = std::max(r, norm(t.x_at(k)));
  return r;
}

int cmd_simulate(const RunConfig& cfg, OutputDir& out, std::size_t, std::ostream& log) {
  const auto spec = build_drift(cfg);
  auto traj = simulate(spec, build_past(cfg, cfg.sim.past), cfg.sim.T, cfg.sim.dt, cfg.sim.seed,
                       cfg.sim.stopping_radius, cfg.sim.trajectory);
  traj.initial_history_id = cfg.sim.past;
  out.write("trajectory.csv", "csv", trajectory_csv(traj));
  out.write("trajectory.json", "json", dump(trajectory_sidecar(traj, spec)));
  log << "simulated " << traj.steps << " steps of " << spec.id() << "\n";
  return kExitOk;
}

KbOptions kb_options(const RunConfig& cfg, std::size_t threads) {
  KbOptions o;
  o.mode = sampling_mode_from_string(cfg.sim.mode);
  o.observable = cfg.sim.observable == "state" ? Observable::state : Observable::state_and_memory;
  o.window_steps = static_cast<std::size_t>(std::llround(cfg.sim.window / cfg.sim.dt));
  o.threads = threads;
  return o;
}

int cmd_stationary(const RunConfig& cfg, OutputDir& out, std::size_t threads, std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto m = kb_average(spec, cfg.sim.n, cfg.sim.T, cfg.sim.dt, cfg.sim.seed, kb_options(cfg, threads));
  Json side = measure_sidecar(m);
  side["mean"] = m.mean();
  side["covariance"] = m.covariance();
  out.write("measure.csv", "csv", measure_csv(m));
  out.write("measure.json", "json", dump(side));
  log << "second moment " << format_double(m.second_moment()) << " over " << m.size() << " samples\n";
  return kExitOk;
}

Json declared_json(const DeclaredConditions& d) {
  return {{"lipschitz", d.lipschitz},         {"K_constant", d.K_constant},
          {"K_slope", d.K_slope},             {"dissipative", d.dissipative},
          {"C1", d.C1},                       {"C2", d.C2},
          {"linear_growth", d.linear_growth}, {"C3", d.C3}};
}

int cmd_check_conditions(const RunConfig& cfg, OutputDir& out, std::size_t threads,
                         std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto sampler = sampler_of(cfg);
  const double R = cfg.checks.domain_bound;
  const auto lip = [&] {
    auto r = estimate_lipschitz(spec, kernel_rate_or_one(cfg), sampler, R, threads);
    r.kernel_rate = kernel_rate_or_one(cfg);
    return r;
  }();
  const auto dis = estimate_dissipativity(spec, sampler, R, 0.5, threads);
  const auto gro = estimate_growth(spec, sampler, R, threads);
  const Json report = {{"drift", to_json(spec)},
                       {"declared", declared_json(declared_conditions(spec))},
                       {"lipschitz", to_json(lip)},
                       {"dissipativity", to_json(dis)},
                       {"growth", to_json(gro)}};
  out.write("conditions.json", "json", dump(report));
  std::size_t violations = 0;
  for (const auto* r : {&lip, &dis, &gro}) {
    for (const auto& v : r->violations) {
      log << "violation: " << v << "\n";
      ++violations;
    }
  }
  if (violations == 0) log << "no condition violations found\n";
  return violations ? kExitCheckFailed : kExitOk;
}

int cmd_check_bounds(const RunConfig& cfg, OutputDir& out, std::size_t threads, std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto declared = declared_conditions(spec);
  const std::size_t d = spec.dimension;

  double C1 = declared.C1, C2 = declared.C2, C3 = declared.C3;
  std::string source = "declared";
  if (!declared.dissipative || !declared.linear_growth) {
    const auto sampler = sampler_of(cfg);
    const auto dis = estimate_dissipativity(spec, sampler, cfg.checks.domain_bound, 0.5, threads);
    const auto gro = estimate_growth(spec, sampler, cfg.checks.domain_bound, threads);
    if (!declared.dissipative) {
      C1 = dis.C1_hat.value_or(0.0);
      C2 = dis.C2_hat.value_or(0.0);
    }
    if (!declared.linear_growth) C3 = gro.C3_hat.value_or(0.0);
    source = "estimated";
  }

  std::vector<BoundCheckReport> reports;
  std::optional<double> M;
  if (C2 > 0.0) {
    const auto m = kb_average(spec, cfg.sim.n, cfg.sim.T, cfg.sim.dt, cfg.sim.seed, kb_options(cfg, threads));
    reports.push_back(moment_bound_check(m, C1, C2, cfg.checks.sigmas, cfg.checks.bootstrap, cfg.sim.seed));
    M = reports.back().theoretical;
  } else {
    BoundCheckReport r;
    r.bound_name = "second_moment";
    r.theoretical = std::numeric_limits<double>::infinity();
    r.empirical = std::nan("");
    r.pass = false;
    r.constants = {{"C1", C1}, {"C2", C2}};
    reports.push_back(r);
    log << "no C2 > 0 available: moment and tail bounds do not apply\n";
  }

  std::vector<std::vector<double>> rows;
  const PastHistory past = build_past(cfg, cfg.sim.past);
  for (double gap : cfg.checks.dt_gaps) {
    const double t1 = cfg.checks.t1;
    const double t2 = t1 + gap;
    if (!M) break;
    const auto snaps = snapshot_ensemble(spec, past, {t1, t2}, cfg.sim.dt, cfg.sim.seed,
                                         cfg.checks.tail_ensemble, threads);
    for (double z : cfg.checks.z) {
      reports.push_back(increment_tail_check(snaps, z, t1, snaps.times[1], C3, *M));
      const auto& r = reports.back();
      rows.push_back({z, gap, r.empirical, r.theoretical, r.tolerance, r.pass ? 1.0 : 0.0});
    }
  }

  Json j = verdicts(reports);
  out.write("bounds.json", "json", dump({{"constants_source", source},
                                         {"drift", to_json(spec)},
                                         {"dimension", d},
                                         {"reports", j}}));
  if (!rows.empty()) {
    out.write("increments.dat", "dat",
              dat_table({"z", "dt", "frequency", "bound", "allowance", "pass"}, rows));
  }
  log_reports(log, reports);
  return all_pass(reports) ? kExitOk : kExitCheckFailed;
}

int cmd_girsanov(const RunConfig& cfg, OutputDir& out, std::size_t threads, std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto& g = cfg.girsanov;
  const auto x_past = build_past(cfg, g.x_past);
  const auto y_past = build_past(cfg, g.y_past);
  const double lambda = g.lambda ? *g.lambda : kernel_rate_or_one(cfg);

  auto traj = simulate(spec, x_past, g.horizon, cfg.sim.dt, cfg.sim.seed, std::nullopt,
                       cfg.sim.trajectory);
  const double R = std::max(path_sup(traj), 1e-12);
  const double K = domain_lipschitz(spec, lambda, R, sampler_of(cfg), threads);
  const DiscrepancyBound bound{K, g.k_prime, lambda, g.lambda_prime};
  const auto profile = drift_discrepancy(traj, x_past, y_past, spec, bound);
  const auto report = rn_density(traj, profile, novikov(profile, g.horizon));

  std::vector<BoundCheckReport> checks;
  {
    BoundCheckReport r;
    r.bound_name = "discrepancy_envelope";
    double worst = 0.0;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < profile.times.size(); ++k) {
      const double b = profile.bound_at(k);
      if (profile.magnitude[k] > b * (1.0 + g.slack)) ++bad;
      if (b > 0.0) worst = std::max(worst, profile.magnitude[k] / b);
      else if (profile.magnitude[k] > 0.0) worst = std::numeric_limits<double>::infinity();
    }
    r.theoretical = 1.0 + g.slack;
    r.empirical = worst;
    r.pass = bad == 0;
    r.constants = {{"K_hat", K}, {"K_prime", g.k_prime}, {"lambda", lambda},
                   {"lambda_prime", g.lambda_prime}, {"L", profile.L}, {"R", R},
                   {"violating_nodes", double(bad)}};
    checks.push_back(r);
  }
  {
    BoundCheckReport r;
    r.bound_name = "novikov";
    r.theoretical = report.novikov_bound;
    r.empirical = report.novikov_truncated;
    r.tolerance = 1e-6;
    r.pass = report.novikov_finite && r.empirical <= r.theoretical + r.tolerance;
    checks.push_back(r);
  }
  Json j = {{"report", to_json(report)}, {"checks", verdicts(checks)}, {"drift", to_json(spec)},
            {"x_past", g.x_past}, {"y_past", g.y_past}, {"seed", cfg.sim.seed}, {"dt", cfg.sim.dt}};
  if (g.paths > 0) {
    const auto ens = rn_density_ensemble(spec, x_past, y_past, g.horizon, cfg.sim.dt, cfg.sim.seed,
                                         g.paths, threads);
    BoundCheckReport r;
    r.bound_name = "martingale_mean";
    r.theoretical = 1.0;
    r.empirical = ens.mean;
    r.tolerance = 3.0 * ens.standard_error;
    r.pass = ens.all_finite && std::abs(ens.mean - 1.0) <= r.tolerance;
    r.constants = {{"paths", double(ens.paths)}, {"standard_error", ens.standard_error},
                   {"min_density", ens.min_density}};
    checks.push_back(r);
    j["checks"] = verdicts(checks);
    j["ensemble"] = to_json(ens);
  }
  out.write("girsanov.json", "json", dump(j));
  out.write("discrepancy.dat", "dat", discrepancy_dat(profile));
  log_reports(log, checks);
  return all_pass(checks) ? kExitOk : kExitCheckFailed;
}

int cmd_couple(const RunConfig& cfg, OutputDir& out, std::size_t threads, std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto& c = cfg.coupling;
  const WindowFunctional F{c.window, c.bound, c.coordinate};
  const auto p1 = build_past(cfg, c.past_1);
  const auto p2 = build_past(cfg, c.past_2);
  const auto report = couple(spec, p1, p2, cfg.sim.T, cfg.sim.dt, cfg.sim.seed, F);
  Json j = to_json(report);
  j["drift"] = to_json(spec);
  int code = kExitOk;
  if (c.replicates >= 2) {
    const double sd = calibrate_average_sd(spec, p1, cfg.sim.T, cfg.sim.dt, cfg.sim.seed,
                                           c.replicates, F, threads);
    BoundCheckReport r;
    r.bound_name = "ergodic_gap";
    r.theoretical = c.factor * sd;
    r.empirical = report.final_gap;
    r.pass = r.empirical <= r.theoretical;
    r.constants = {{"calibration_sd", sd}, {"replicates", double(c.replicates)}, {"factor", c.factor}};
    j["checks"] = verdicts({r});
    log_reports(log, {r});
    if (!r.pass) code = kExitCheckFailed;
  }
  out.write("coupling.json", "json", dump(j));
  out.write("coupling.dat", "dat", coupling_dat(report));
  log << "final ergodic-average gap " << format_double(report.final_gap) << "\n";
  return code;
}

int cmd_diagnose_growth(const RunConfig& cfg, OutputDir& out, std::size_t, std::ostream& log) {
  const auto spec = build_drift(cfg);
  const auto traj = simulate(spec, build_past(cfg, cfg.sim.past), cfg.sim.T, cfg.sim.dt,
                             cfg.sim.seed, cfg.sim.stopping_radius, cfg.sim.trajectory);
  GrowthOptions opts;
  opts.delta = cfg.checks.delta;
  opts.delta0 = cfg.checks.delta0;
  opts.k_window = cfg.checks.k_window;
  opts.allowed_fraction = cfg.checks.allowed_fraction;
  const auto r = growth_diagnostic(traj, opts);
  out.write("growth.json", "json", dump(verdicts({r})));
  out.write("growth.dat", "dat", dat_table(r.columns, r.rows));
  log_reports(log, {r});
  return r.pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"simulate",       "stationary", "check-conditions",
                                             "check-bounds",   "girsanov",   "couple",
                                             "diagnose-growth"};
  return s;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

RunConfig apply_overrides(RunConfig config, const Overrides& o) {
  if (o.seed) config.sim.seed = *o.seed;
  if (o.T) config.sim.T = *o.T;
  if (o.dt) config.sim.dt = *o.dt;
  if (o.n) config.sim.n = *o.n;
  if (o.out) config.output.directory = *o.out;
  validate_config(config);
  return config;
}

int run_command(const std::string& subcommand, const RunConfig& config,
                const std::string& config_text, const Overrides& overrides, std::size_t threads,
                std::ostream& log) {
  using Fn = int (*)(const RunConfig&, OutputDir&, std::size_t, std::ostream&);
  static const std::map<std::string, Fn> table = {
      {"simulate", cmd_simulate},          {"stationary", cmd_stationary},
      {"check-conditions", cmd_check_conditions}, {"check-bounds", cmd_check_bounds},
      {"girsanov", cmd_girsanov},          {"couple", cmd_couple},
      {"diagnose-growth", cmd_diagnose_growth}};
  const auto it = table.find(subcommand);
  if (it == table.end()) throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
  if (subcommand == "girsanov" && !config.girsanov.present) {
    throw std::invalid_argument("girsanov needs a [girsanov] section");
  }
  if (subcommand == "couple" && !config.coupling.present) {
    throw std::invalid_argument("couple needs a [coupling] section");
  }
  OutputDir out(config);
  const int code = it->second(config, out, threads, log);
  write_manifest(out, subcommand, config, config_text, overrides, code);
  return code;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of SDEs with exponentially fading memory", "memsde"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  Overrides o;
  std::optional<std::size_t> threads_flag;
  std::uint64_t seed = 0;
  double T = 0.0, dt = 0.0;
  std::size_t n = 0;
  std::string out_dir;

  std::map<std::string, CLI::App*> subs;
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "master seed (overrides sim.seed)");
    sub->add_option("--threads", threads_flag, "worker threads; 0 = all cores");
    sub->add_option("--T", T, "horizon (overrides sim.T)");
    sub->add_option("--dt", dt, "time step (overrides sim.dt)");
    sub->add_option("--n", n, "ensemble size (overrides sim.n)");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  const auto* sub = subs.at(command);
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--T")) o.T = T;
  if (sub->count("--dt")) o.dt = dt;
  if (sub->count("--n")) o.n = n;
  if (sub->count("--out")) o.out = out_dir;

  try {
    std::ifstream f(config_path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    const std::string text = s.str();
    const RunConfig cfg = apply_overrides(parse_config(text), o);

    std::size_t threads = cfg.sim.threads;
    if (threads_flag) {
      threads = *threads_flag;
    } else if (const char* env = std::getenv("MEMSDE_THREADS"); env && *env) {
      try {
        threads = static_cast<std::size_t>(std::stoul(env));
      } catch (const std::exception&) {
        throw std::invalid_argument(std::string("MEMSDE_THREADS is not a number: ") + env);
      }
    }
    return run_command(command, cfg, text, o, threads, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "memsde " << command << ": " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace memsde
