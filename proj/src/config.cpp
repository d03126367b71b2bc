#include "memsde/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "memsde/serialize.hpp"

namespace memsde {

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string out = "invalid config";
  for (const auto& i : issues) {
    out += "\n  ";
    if (i.line) out += "line " + std::to_string(i.line) + ": ";
    if (!i.field.empty()) out += i.field + ": ";
    out += i.message;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

double to_double(const std::string& s) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

template <class S>
struct Field {
  const char* key;
  std::function<void(S&, const std::string&)> set;
  std::function<std::optional<std::string>(const S&)> get;
};

template <class S>
Field<S> real(const char* k, double S::*m) {
  return {k, [m](S& s, const std::string& v) { s.*m = to_double(v); },
          [m](const S& s) { return std::optional(format_double(s.*m)); }};
}

template <class S>
Field<S> opt_real(const char* k, std::optional<double> S::*m) {
  return {k, [m](S& s, const std::string& v) { s.*m = to_double(v); },
          [m](const S& s) -> std::optional<std::string> {
            if (!(s.*m)) return std::nullopt;
            return format_double(*(s.*m));
          }};
}

template <class S, class U>
Field<S> integer(const char* k, U S::*m) {
  return {k, [m](S& s, const std::string& v) { s.*m = static_cast<U>(to_u64(v)); },
          [m](const S& s) { return std::optional(std::to_string(s.*m)); }};
}

template <class S>
Field<S> text(const char* k, std::string S::*m) {
  return {k, [m](S& s, const std::string& v) { s.*m = v; },
          [m](const S& s) { return std::optional(s.*m); }};
}

template <class S>
Field<S> reals(const char* k, std::vector<double> S::*m) {
  return {k,
          [m](S& s, const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(to_double(item));
            s.*m = std::move(out);
          },
          [m](const S& s) {
            std::string out;
            for (std::size_t i = 0; i < (s.*m).size(); ++i) {
              if (i) out += ", ";
              out += format_double((s.*m)[i]);
            }
            return std::optional(out);
          }};
}

template <class S>
Field<S> words(const char* k, std::vector<std::string> S::*m) {
  return {k, [m](S& s, const std::string& v) { s.*m = split_list(v); },
          [m](const S& s) {
            std::string out;
            for (std::size_t i = 0; i < (s.*m).size(); ++i) {
              if (i) out += ", ";
              out += (s.*m)[i];
            }
            return std::optional(out);
          }};
}

const std::vector<Field<DriftConfig>>& drift_fields() {
  static const std::vector<Field<DriftConfig>> f = {
      text("family", &DriftConfig::family),       real("b", &DriftConfig::b),
      real("epsilon", &DriftConfig::epsilon),     real("kappa", &DriftConfig::kappa),
      real("lambda", &DriftConfig::lambda),       integer("dimension", &DriftConfig::dimension),
      reals("direction", &DriftConfig::direction), words("components", &DriftConfig::components)};
  return f;
}

const std::vector<Field<SimConfig>>& sim_fields() {
  static const std::vector<Field<SimConfig>> f = {
      real("T", &SimConfig::T),
      real("dt", &SimConfig::dt),
      integer("n", &SimConfig::n),
      integer("seed", &SimConfig::seed),
      opt_real("stopping_radius", &SimConfig::stopping_radius),
      real("window", &SimConfig::window),
      text("past", &SimConfig::past),
      text("mode", &SimConfig::mode),
      text("observable", &SimConfig::observable),
      integer("trajectory", &SimConfig::trajectory),
      integer("threads", &SimConfig::threads)};
  return f;
}

const std::vector<Field<ChecksConfig>>& checks_fields() {
  static const std::vector<Field<ChecksConfig>> f = {
      reals("z", &ChecksConfig::z),
      reals("dt_gaps", &ChecksConfig::dt_gaps),
      real("t1", &ChecksConfig::t1),
      integer("tail_ensemble", &ChecksConfig::tail_ensemble),
      real("delta", &ChecksConfig::delta),
      real("delta0", &ChecksConfig::delta0),
      real("k_window", &ChecksConfig::k_window),
      real("allowed_fraction", &ChecksConfig::allowed_fraction),
      integer("projections", &ChecksConfig::projections),
      integer("bootstrap", &ChecksConfig::bootstrap),
      real("sigmas", &ChecksConfig::sigmas),
      real("domain_bound", &ChecksConfig::domain_bound),
      integer("samples", &ChecksConfig::samples),
      integer("sampler_seed", &ChecksConfig::sampler_seed)};
  return f;
}

const std::vector<Field<GirsanovConfig>>& girsanov_fields() {
  static const std::vector<Field<GirsanovConfig>> f = {
      text("x_past", &GirsanovConfig::x_past),
      text("y_past", &GirsanovConfig::y_past),
      real("lambda_prime", &GirsanovConfig::lambda_prime),
      real("k_prime", &GirsanovConfig::k_prime),
      opt_real("lambda", &GirsanovConfig::lambda),
      real("horizon", &GirsanovConfig::horizon),
      integer("paths", &GirsanovConfig::paths),
      real("slack", &GirsanovConfig::slack)};
  return f;
}

const std::vector<Field<CouplingConfig>>& coupling_fields() {
  static const std::vector<Field<CouplingConfig>> f = {
      text("past_1", &CouplingConfig::past_1),
      text("past_2", &CouplingConfig::past_2),
      real("window", &CouplingConfig::window),
      real("bound", &CouplingConfig::bound),
      integer("coordinate", &CouplingConfig::coordinate),
      integer("replicates", &CouplingConfig::replicates),
      real("factor", &CouplingConfig::factor)};
  return f;
}

const std::vector<Field<PastConfig>>& past_fields() {
  static const std::vector<Field<PastConfig>> f = {reals("terms", &PastConfig::terms)};
  return f;
}

const std::vector<Field<OutputConfig>>& output_fields() {
  static const std::vector<Field<OutputConfig>> f = {
      text("directory", &OutputConfig::directory), words("formats", &OutputConfig::formats)};
  return f;
}

template <class S>
bool assign(const std::vector<Field<S>>& fields, S& target, const std::string& key,
            const std::string& value) {
  for (const auto& f : fields) {
    if (key == f.key) {
      f.set(target, value);
      return true;
    }
  }
  return false;
}

template <class S>
void emit(std::string& out, const std::string& header, const std::vector<Field<S>>& fields,
          const S& s) {
  out += "[" + header + "]\n";
  for (const auto& f : fields) {
    if (auto v = f.get(s)) out += std::string(f.key) + " = " + *v + "\n";
  }
  out += "\n";
}

struct Validator {
  const std::map<std::string, std::size_t>& lines;
  std::vector<ConfigIssue> issues;

  void fail(const std::string& field, const std::string& message) {
    const auto it = lines.find(field);
    issues.push_back({it == lines.end() ? 0 : it->second, field, message});
  }
  void positive(const std::string& field, double v) {
    if (!(v > 0.0)) fail(field, "must be positive");
  }
};

void check_past_name(Validator& v, const RunConfig& c, const std::string& field,
                     const std::string& name) {
  if (name != "zero" && !c.pasts.contains(name)) {
    v.fail(field, "unknown past '" + name + "' (no [past." + name + "] section)");
  }
}

void check_drift(Validator& v, const RunConfig& c, const DriftConfig& d, const std::string& sec,
                 std::set<std::string>& visiting) {
  static const std::set<std::string> families = {"ou", "modulated_damping",
                                                 "linear_distributed_delay", "composite"};
  if (!families.contains(d.family)) {
    v.fail(sec + ".family", "unknown family '" + d.family + "'");
  }
  v.positive(sec + ".lambda", d.lambda);
  if (d.dimension == 0) v.fail(sec + ".dimension", "must be positive");
  if (d.dimension != c.drift.dimension) {
    v.fail(sec + ".dimension", "must match drift.dimension");
  }
  if (!d.direction.empty() && d.direction.size() != d.dimension) {
    v.fail(sec + ".direction", "needs one entry per dimension");
  }
  if (d.family != "composite" && !d.components.empty()) {
    v.fail(sec + ".components", "only the composite family takes components");
  }
  for (const auto& name : d.components) {
    const auto it = c.drift_parts.find(name);
    if (it == c.drift_parts.end()) {
      v.fail(sec + ".components", "unknown component '" + name + "' (no [drift." + name + "] section)");
    } else if (!visiting.insert(name).second) {
      v.fail(sec + ".components", "component '" + name + "' refers back to itself");
    } else {
      check_drift(v, c, it->second, "drift." + name, visiting);
      visiting.erase(name);
    }
  }
}

void validate_with(const RunConfig& c, const std::map<std::string, std::size_t>& lines) {
  Validator v{lines, {}};
  std::set<std::string> visiting;
  check_drift(v, c, c.drift, "drift", visiting);

  v.positive("sim.T", c.sim.T);
  v.positive("sim.dt", c.sim.dt);
  if (c.sim.n == 0) v.fail("sim.n", "must be positive");
  if (!(c.sim.window >= 0.0)) v.fail("sim.window", "must be non-negative");
  if (c.sim.stopping_radius) v.positive("sim.stopping_radius", *c.sim.stopping_radius);
  check_past_name(v, c, "sim.past", c.sim.past);
  if (c.sim.mode != "uniform_time" && c.sim.mode != "terminal") {
    v.fail("sim.mode", "must be uniform_time or terminal");
  }
  if (c.sim.observable != "state" && c.sim.observable != "state_and_memory") {
    v.fail("sim.observable", "must be state or state_and_memory");
  }

  for (double z : c.checks.z) {
    if (!(z > 0.0)) v.fail("checks.z", "entries must be positive");
  }
  for (double g : c.checks.dt_gaps) {
    if (!(g > 0.0)) v.fail("checks.dt_gaps", "entries must be positive");
  }
  if (!(c.checks.t1 >= 0.0)) v.fail("checks.t1", "must be non-negative");
  if (c.checks.tail_ensemble == 0) v.fail("checks.tail_ensemble", "must be positive");
  v.positive("checks.delta", c.checks.delta);
  v.positive("checks.delta0", c.checks.delta0);
  v.positive("checks.k_window", c.checks.k_window);
  if (!(c.checks.allowed_fraction >= 0.0 && c.checks.allowed_fraction <= 1.0)) {
    v.fail("checks.allowed_fraction", "must lie in [0, 1]");
  }
  if (c.checks.projections == 0) v.fail("checks.projections", "must be positive");
  if (c.checks.bootstrap < 2) v.fail("checks.bootstrap", "needs at least 2 replicates");
  v.positive("checks.sigmas", c.checks.sigmas);
  v.positive("checks.domain_bound", c.checks.domain_bound);
  if (c.checks.samples == 0) v.fail("checks.samples", "must be positive");

  if (c.girsanov.present) {
    const auto& g = c.girsanov;
    v.positive("girsanov.lambda_prime", g.lambda_prime);
    if (!(g.k_prime >= 0.0)) v.fail("girsanov.k_prime", "must be non-negative");
    v.positive("girsanov.horizon", g.horizon);
    if (!(g.slack >= 0.0)) v.fail("girsanov.slack", "must be non-negative");
    const auto lambda = g.lambda ? g.lambda : drift_rate(c);
    if (g.lambda) v.positive("girsanov.lambda", *g.lambda);
    if (!lambda) {
      v.fail("girsanov.lambda", "the drift has no kernel rate; set girsanov.lambda");
    } else if (!(g.lambda_prime < *lambda)) {
      v.fail("girsanov.lambda_prime", "must be strictly below the kernel rate lambda = " +
                                          format_double(*lambda));
    }
    check_past_name(v, c, "girsanov.x_past", g.x_past);
    check_past_name(v, c, "girsanov.y_past", g.y_past);
  }

  if (c.coupling.present) {
    const auto& k = c.coupling;
    check_past_name(v, c, "coupling.past_1", k.past_1);
    check_past_name(v, c, "coupling.past_2", k.past_2);
    v.positive("coupling.window", k.window);
    v.positive("coupling.bound", k.bound);
    v.positive("coupling.factor", k.factor);
    if (k.coordinate >= c.drift.dimension) v.fail("coupling.coordinate", "out of range");
    if (k.replicates == 1) v.fail("coupling.replicates", "use 0 (no calibration) or at least 2");
  }

  for (const auto& [name, p] : c.pasts) {
    if (p.terms.size() % (c.drift.dimension + 1) != 0) {
      v.fail("past." + name + ".terms",
             "expects groups of " + std::to_string(c.drift.dimension) + " amplitude(s) and a rate");
    }
  }

  static const std::set<std::string> formats = {"csv", "json", "dat"};
  for (const auto& f : c.output.formats) {
    if (!formats.contains(f)) v.fail("output.formats", "unknown format '" + f + "'");
  }
  if (c.output.directory.empty()) v.fail("output.directory", "must not be empty");

  if (v.issues.empty()) {
    try {
      build_drift(c).validate();
    } catch (const std::invalid_argument& e) {
      v.fail("drift", e.what());
    }
  }
  if (!v.issues.empty()) throw ConfigError(std::move(v.issues));
}

DriftSpec spec_from(const RunConfig& c, const DriftConfig& d) {
  const std::size_t dim = c.drift.dimension;
  DriftSpec spec;
  if (d.family == "ou") {
    spec = DriftSpec::ou(d.b, dim);
  } else if (d.family == "modulated_damping") {
    spec = DriftSpec::modulated_damping(d.b, d.epsilon, d.lambda, dim);
  } else if (d.family == "linear_distributed_delay") {
    spec = DriftSpec::linear_delay(d.b, d.kappa, d.lambda, dim);
  } else if (d.family == "composite") {
    std::vector<DriftSpec> parts;
    for (const auto& name : d.components) parts.push_back(spec_from(c, c.drift_parts.at(name)));
    spec = DriftSpec::composite(std::move(parts), dim);
  } else {
    throw std::invalid_argument("unknown drift family '" + d.family + "'");
  }
  spec.direction = d.direction;
  return spec;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

bool RunConfig::emits(const std::string& format) const {
  return std::find(output.formats.begin(), output.formats.end(), format) != output.formats.end();
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::vector<ConfigIssue> issues;
  std::map<std::string, std::size_t> lines;
  std::set<std::string> seen_sections;
  std::string section;
  bool section_ok = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({lineno, "", "syntax error: unterminated section header"});
        section_ok = false;
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      section_ok = true;
      if (!seen_sections.insert(section).second) {
        issues.push_back({lineno, section, "duplicate section"});
      }
      const auto dot = section.find('.');
      const std::string head = section.substr(0, dot);
      const std::string tail = dot == std::string::npos ? "" : section.substr(dot + 1);
      if (dot == std::string::npos) {
        if (section == "girsanov") c.girsanov.present = true;
        else if (section == "coupling") c.coupling.present = true;
        else if (section != "drift" && section != "sim" && section != "checks" && section != "output") {
          issues.push_back({lineno, section, "unknown section"});
          section_ok = false;
        }
      } else if ((head == "past" || head == "drift") && valid_name(tail)) {
        if (head == "past") {
          if (tail == "zero") {
            issues.push_back({lineno, section, "'zero' is reserved for the zero past"});
          }
          c.pasts[tail];
        } else {
          c.drift_parts[tail];
        }
      } else {
        issues.push_back({lineno, section, "unknown section"});
        section_ok = false;
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({lineno, section, "syntax error: expected 'key = value'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      issues.push_back({lineno, section, "syntax error: missing key"});
      continue;
    }
    if (section.empty()) {
      issues.push_back({lineno, key, "key outside any section"});
      continue;
    }
    if (!section_ok) continue;
    const std::string field = section + "." + key;
    if (lines.contains(field)) {
      issues.push_back({lineno, field, "duplicate key"});
      continue;
    }
    lines[field] = lineno;

    try {
      bool known = false;
      const auto dot = section.find('.');
      if (section == "drift") known = assign(drift_fields(), c.drift, key, value);
      else if (section == "sim") known = assign(sim_fields(), c.sim, key, value);
      else if (section == "checks") known = assign(checks_fields(), c.checks, key, value);
      else if (section == "girsanov") known = assign(girsanov_fields(), c.girsanov, key, value);
      else if (section == "coupling") known = assign(coupling_fields(), c.coupling, key, value);
      else if (section == "output") known = assign(output_fields(), c.output, key, value);
      else if (section.starts_with("past."))
        known = assign(past_fields(), c.pasts[section.substr(dot + 1)], key, value);
      else if (section.starts_with("drift."))
        known = assign(drift_fields(), c.drift_parts[section.substr(dot + 1)], key, value);
      if (!known) issues.push_back({lineno, field, "unknown key '" + field + "'"});
    } catch (const std::invalid_argument& e) {
      issues.push_back({lineno, field, e.what()});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  // Parts inherit the top-level dimension unless they say otherwise.
  for (auto& [name, part] : c.drift_parts) {
    if (!lines.contains("drift." + name + ".dimension")) part.dimension = c.drift.dimension;
  }
  validate_with(c, lines);
  return c;
}

void validate_config(const RunConfig& config) { validate_with(config, {}); }

std::string serialize_config(const RunConfig& c) {
  std::string out;
  emit(out, "drift", drift_fields(), c.drift);
  for (const auto& [name, part] : c.drift_parts) emit(out, "drift." + name, drift_fields(), part);
  emit(out, "sim", sim_fields(), c.sim);
  emit(out, "checks", checks_fields(), c.checks);
  if (c.girsanov.present) emit(out, "girsanov", girsanov_fields(), c.girsanov);
  if (c.coupling.present) emit(out, "coupling", coupling_fields(), c.coupling);
  for (const auto& [name, past] : c.pasts) emit(out, "past." + name, past_fields(), past);
  emit(out, "output", output_fields(), c.output);
  return out;
}

DriftSpec build_drift(const RunConfig& config) { return spec_from(config, config.drift); }

std::optional<double> drift_rate(const RunConfig& config) {
  std::optional<double> rate;
  for (const auto& k : required_kernels(build_drift(config))) {
    rate = rate ? std::max(*rate, k.rate) : k.rate;
  }
  return rate;
}

PastHistory build_past(const RunConfig& config, const std::string& name) {
  const double dt = config.sim.dt;
  const std::size_t d = config.drift.dimension;
  const auto steps = static_cast<std::size_t>(std::llround(config.sim.window / dt));
  if (name == "zero") return PastHistory::zero(dt, steps, d);
  const auto it = config.pasts.find(name);
  if (it == config.pasts.end()) throw std::invalid_argument("unknown past '" + name + "'");
  const auto& terms = it->second.terms;
  if (terms.empty()) return PastHistory::zero(dt, steps, d);
  std::vector<TailTerm> tail;
  for (std::size_t i = 0; i + d < terms.size(); i += d + 1) {
    tail.push_back(TailTerm{Vector(terms.begin() + static_cast<long>(i),
                                   terms.begin() + static_cast<long>(i + d)),
                            terms[i + d]});
  }
  return PastHistory::analytic(dt, steps, std::move(tail));
}

}  // namespace memsde
