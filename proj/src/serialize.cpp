#include "memsde/serialize.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace memsde {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

namespace {

std::string csv_header(std::size_t d) {
  std::string h = "t";
  for (std::size_t c = 1; c <= d; ++c) h += ",x_" + std::to_string(c);
  for (std::size_t c = 1; c <= d; ++c) h += ",w_" + std::to_string(c);
  return h + "\r\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

Json vec_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Vector json_vec(const Json& j) {
  Vector v;
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

}  // namespace

std::string path_csv(const PathRecord& path) {
  const std::size_t d = path.dimension;
  std::string out = csv_header(d);
  for (std::size_t i = 0; i < path.size(); ++i) {
    out += format_double(path.time(i));
    for (std::size_t c = 0; c < d; ++c) out += "," + format_double(path.x[i * d + c]);
    for (std::size_t c = 0; c < d; ++c) out += "," + format_double(path.w_at(i, c));
    out += "\r\n";
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj) { return path_csv(to_record(traj)); }

PathRecord parse_path_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("path csv: empty input");
  const auto header = split(line, ',');
  if (header.size() < 3 || (header.size() - 1) % 2 != 0 || header[0] != "t") {
    throw std::invalid_argument("path csv: bad header");
  }
  PathRecord r;
  r.dimension = (header.size() - 1) / 2;
  if (csv_header(r.dimension) != line + (line.ends_with('\r') ? "\n" : "\r\n")) {
    throw std::invalid_argument("path csv: bad header");
  }
  std::vector<double> times;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::invalid_argument("path csv: wrong column count on line " + std::to_string(row));
    }
    times.push_back(parse_double(cells[0]));
    for (std::size_t c = 0; c < r.dimension; ++c) r.x.push_back(parse_double(cells[1 + c]));
    for (std::size_t c = 0; c < r.dimension; ++c) {
      r.w_base.push_back(parse_double(cells[1 + r.dimension + c]));
    }
  }
  if (times.size() < 2) throw std::invalid_argument("path csv: need at least two rows");
  r.grid_step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  r.first_index = static_cast<std::int64_t>(std::llround(times.front() / r.grid_step));
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(r.time(i) - times[i]) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
      throw std::invalid_argument("path csv: times are not on a uniform grid");
    }
  }
  r.w_anchor.assign(r.dimension, 0.0);
  return r;
}

Json to_json(const PastHistory& h) {
  Json window = Json::array();
  for (std::size_t i = 0; i < h.window_size(); ++i) window.push_back(vec_json(h.sample(i)));
  Json terms = Json::array();
  for (const auto& t : h.tail_terms()) {
    terms.push_back({{"amplitude", vec_json(t.amplitude)}, {"rate", t.rate}});
  }
  Json accs = Json::array();
  for (const auto& a : h.accumulators()) {
    accs.push_back({{"rate", a.rate},
                    {"transform", std::string(to_string(a.transform))},
                    {"value", vec_json(a.value)},
                    {"tail", vec_json(a.tail)}});
  }
  return {{"grid_step", h.grid_step()},
          {"window", window},
          {"tail_model",
           {{"terms", terms},
            {"initial_boundary", h.initial_boundary()},
            {"pushes", h.pushes()},
            {"dropped", h.dropped()}}},
          {"accumulators", accs}};
}

PastHistory past_history_from_json(const Json& j) {
  std::vector<Vector> window;
  for (const auto& s : j.at("window")) window.push_back(json_vec(s));
  const auto& tm = j.at("tail_model");
  std::vector<TailTerm> terms;
  for (const auto& t : tm.at("terms")) {
    terms.push_back(TailTerm{json_vec(t.at("amplitude")), t.at("rate").get<double>()});
  }
  std::vector<KernelAccumulator> accs;
  for (const auto& a : j.at("accumulators")) {
    KernelAccumulator acc;
    acc.rate = a.at("rate").get<double>();
    acc.transform = transform_from_string(a.at("transform").get<std::string>());
    acc.value = json_vec(a.at("value"));
    acc.tail = json_vec(a.at("tail"));
    accs.push_back(std::move(acc));
  }
  return PastHistory::restore(j.at("grid_step").get<double>(), std::move(window), std::move(terms),
                              tm.at("initial_boundary").get<double>(),
                              tm.at("pushes").get<std::uint64_t>(),
                              tm.at("dropped").get<std::uint64_t>(), std::move(accs));
}

Json to_json(const DriftSpec& spec) {
  Json j = std::visit(
      [&](const auto& f) -> Json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, OrnsteinUhlenbeck>) {
          return {{"family", "ou"}, {"b", f.b}};
        } else if constexpr (std::is_same_v<F, ModulatedDamping>) {
          return {{"family", "modulated_damping"}, {"b", f.b}, {"epsilon", f.epsilon}, {"lambda", f.rate}};
        } else if constexpr (std::is_same_v<F, LinearDistributedDelay>) {
          return {{"family", "linear_distributed_delay"}, {"b", f.b}, {"kappa", f.kappa}, {"lambda", f.rate}};
        } else {
          Json parts = Json::array();
          for (const auto& p : f.parts) parts.push_back(to_json(p));
          return {{"family", "composite"}, {"parts", parts}};
        }
      },
      spec.family);
  j["dimension"] = spec.dimension;
  if (!spec.direction.empty()) j["direction"] = vec_json(spec.direction);
  j["id"] = spec.id();
  return j;
}

Json trajectory_sidecar(const Trajectory& traj, const DriftSpec& spec) {
  Json tau = nullptr;
  if (traj.tau_r) {
    tau = {{"node", traj.tau_r->node},
           {"time", traj.time(traj.tau_r->node)},
           {"radius", traj.tau_r->radius}};
  }
  Json j = {{"seed", traj.seed},
            {"trajectory_index", traj.index},
            {"dt", traj.dt},
            {"T", traj.horizon()},
            {"steps", traj.steps},
            {"dimension", traj.dimension},
            {"tau_r_hit", tau},
            {"stopping_radius", traj.stopping_radius ? Json(*traj.stopping_radius) : Json(nullptr)},
            {"drift_spec", to_json(spec)}};
  if (!traj.initial_history_id.empty()) j["initial_history"] = traj.initial_history_id;
  return j;
}

namespace {

std::string window_csv(const std::vector<Vector>& x, const std::vector<Vector>& y, double dt) {
  const std::size_t d = x.empty() ? 0 : x.front().size();
  std::string out = "s";
  for (std::size_t c = 1; c <= d; ++c) out += ",x_" + std::to_string(c);
  if (!y.empty()) {
    for (std::size_t c = 1; c <= d; ++c) out += ",y_" + std::to_string(c);
  }
  out += "\r\n";
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    out += format_double(-static_cast<double>(n - 1 - i) * dt);
    for (double v : x[i]) out += "," + format_double(v);
    if (!y.empty()) {
      for (double v : y[i]) out += "," + format_double(v);
    }
    out += "\r\n";
  }
  return out;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const ConditionReport& r) {
  Json witnesses = Json::array();
  for (const auto& w : r.witnesses) {
    witnesses.push_back({{"index", w.index},
                         {"ratio", w.ratio},
                         {"note", w.note},
                         {"path_csv", window_csv(w.x_window, w.y_window, r.grid_step)}});
  }
  return {{"drift_id", r.drift_id},
          {"domain_bound", r.domain_bound},
          {"samples_drawn", r.samples_drawn},
          {"samples_used", r.samples_used},
          {"kernel_rate", r.kernel_rate},
          {"K_hat", optional_json(r.K_hat)},
          {"C1_hat", optional_json(r.C1_hat)},
          {"C2_hat", optional_json(r.C2_hat)},
          {"C3_hat", optional_json(r.C3_hat)},
          {"grid_step", r.grid_step},
          {"violations", r.violations},
          {"witnesses", witnesses}};
}

Json to_json(const BoundCheckReport& r) {
  Json constants = Json::object();
  for (const auto& [k, v] : r.constants) constants[k] = v;
  return {{"bound", r.bound_name},
          {"theoretical", r.theoretical},
          {"empirical", r.empirical},
          {"tolerance", r.tolerance},
          {"verdict", r.pass ? "PASS" : "FAIL"},
          {"constants", constants}};
}

Json to_json(const GirsanovReport& r) {
  return {{"horizon", r.horizon},
          {"novikov_truncated", r.novikov_truncated},
          {"novikov_tail_bound", r.novikov_tail_bound},
          {"novikov_integral", r.novikov_integral},
          {"novikov_bound", r.novikov_bound},
          {"novikov_finite", r.novikov_finite},
          {"log_rn_density", optional_json(r.log_rn_density)},
          {"rn_density", optional_json(r.rn_density)}};
}

Json to_json(const CouplingReport& r) {
  const double final_disc = r.discrepancy.empty() ? 0.0 : r.discrepancy.back();
  return {{"horizon", r.first.horizon()},
          {"dt", r.first.dt},
          {"seed", r.first.seed},
          {"final_discrepancy", final_disc},
          {"initial_discrepancy", r.discrepancy.empty() ? 0.0 : r.discrepancy.front()},
          {"final_average_1", r.final_average1},
          {"final_average_2", r.final_average2},
          {"final_gap", r.final_gap},
          {"functional",
           {{"window", r.functional.window},
            {"bound", r.functional.bound},
            {"coordinate", r.functional.coordinate}}}};
}

Json to_json(const DensityEnsemble& e) {
  return {{"paths", e.paths},
          {"mean", e.mean},
          {"standard_error", e.standard_error},
          {"min_density", e.min_density},
          {"all_finite", e.all_finite}};
}

std::string measure_csv(const EmpiricalMeasure& m) {
  std::string out;
  for (std::size_t c = 0; c < m.dimension; ++c) {
    if (c) out += ",";
    out += c < m.state_dimension ? "x_" + std::to_string(c + 1)
                                 : "m_" + std::to_string(c - m.state_dimension + 1);
  }
  out += "\r\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto s = m.sample(i);
    for (std::size_t c = 0; c < s.size(); ++c) {
      if (c) out += ",";
      out += format_double(s[c]);
    }
    out += "\r\n";
  }
  return out;
}

Json measure_sidecar(const EmpiricalMeasure& m) {
  const auto& p = m.provenance;
  return {{"ensemble_size", p.ensemble_size},
          {"horizon", p.horizon},
          {"dt", p.dt},
          {"seed", p.seed},
          {"rule", p.rule},
          {"drift_id", p.drift_id},
          {"dimension", m.dimension},
          {"state_dimension", m.state_dimension},
          {"second_moment", m.second_moment()}};
}

std::string dat_table(const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::string out = "#";
  for (const auto& c : columns) out += " " + c;
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += " ";
      out += format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

std::string discrepancy_dat(const DiscrepancyProfile& p) {
  std::vector<std::vector<double>> rows;
  rows.reserve(p.times.size());
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    rows.push_back({p.times[k], p.magnitude[k], p.bound_at(k)});
  }
  return dat_table({"t", "discrepancy", "bound"}, rows);
}

std::string coupling_dat(const CouplingReport& r) {
  std::vector<std::vector<double>> rows;
  rows.reserve(r.times.size());
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    const double a1 = k < r.average1.size() ? r.average1[k] : std::nan("");
    const double a2 = k < r.average2.size() ? r.average2[k] : std::nan("");
    rows.push_back({r.times[k], r.discrepancy[k], a1, a2});
  }
  return dat_table({"t", "discrepancy", "average_1", "average_2"}, rows);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace memsde
