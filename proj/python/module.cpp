#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "memsde/cli.hpp"
#include "memsde/girsanov.hpp"
#include "memsde/serialize.hpp"
#include "memsde/stationary.hpp"

namespace py = pybind11;
using namespace memsde;

namespace {

py::array_t<double> matrix(const std::vector<double>& flat, std::size_t cols) {
  const auto rows = static_cast<py::ssize_t>(cols == 0 ? 0 : flat.size() / cols);
  py::array_t<double> a({rows, static_cast<py::ssize_t>(cols)});
  std::copy(flat.begin(), flat.end(), a.mutable_data());
  return a;
}

py::object as_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<TailTerm> terms_from(const std::vector<std::pair<std::vector<double>, double>>& terms) {
  std::vector<TailTerm> out;
  for (const auto& [amp, rate] : terms) out.push_back({amp, rate});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Euler-Maruyama simulation and checks for SDEs with fading exponential memory";
  m.attr("__version__") = kVersion;

  py::class_<DriftSpec>(m, "Drift")
      .def_static("ou", &DriftSpec::ou, py::arg("b"), py::arg("dimension") = 1)
      .def_static("modulated_damping", &DriftSpec::modulated_damping, py::arg("b"), py::arg("epsilon"),
                  py::arg("rate"), py::arg("dimension") = 1)
      .def_static("linear_delay", &DriftSpec::linear_delay, py::arg("b"), py::arg("kappa"), py::arg("rate"),
                  py::arg("dimension") = 1)
      .def_static("composite", &DriftSpec::composite, py::arg("parts"), py::arg("dimension") = 1)
      .def_static("zero", &DriftSpec::zero, py::arg("dimension") = 1)
      .def_readwrite("direction", &DriftSpec::direction)
      .def_readonly("dimension", &DriftSpec::dimension)
      .def_property_readonly("id", &DriftSpec::id)
      .def("declared", [](const DriftSpec& s) {
        const auto d = declared_conditions(s);
        py::dict out;
        out["lipschitz"] = d.lipschitz;
        out["K_constant"] = d.K_constant;
        out["K_slope"] = d.K_slope;
        out["dissipative"] = d.dissipative;
        out["C1"] = d.C1;
        out["C2"] = d.C2;
        out["linear_growth"] = d.linear_growth;
        out["C3"] = d.C3;
        return out;
      })
      .def("__call__", [](const DriftSpec& s, PastHistory h) {
        register_kernels(s, h);
        return evaluate(s, h);
      })
      .def("__repr__", [](const DriftSpec& s) { return "<Drift " + s.id() + ">"; });

  py::class_<PastHistory>(m, "Past")
      .def_static("zero", &PastHistory::zero, py::arg("dt"), py::arg("window_steps"), py::arg("dimension") = 1)
      .def_static("sampled", &PastHistory::sampled, py::arg("dt"), py::arg("samples"))
      .def_static(
          "analytic",
          [](double dt, std::size_t window_steps, const std::vector<std::pair<std::vector<double>, double>>& t) {
            return PastHistory::analytic(dt, window_steps, terms_from(t));
          },
          py::arg("dt"), py::arg("window_steps"), py::arg("terms"),
          "x(s) = sum amplitude * exp(rate * |s|) for a list of (amplitude, rate) pairs")
      .def_property_readonly("dt", &PastHistory::grid_step)
      .def_property_readonly("dimension", &PastHistory::dimension)
      .def_property_readonly("window", &PastHistory::window)
      .def("kernel_integral",
           [](PastHistory h, double rate, const std::string& transform) {
             const auto t = transform_from_string(transform);
             h.register_kernel(rate, t);
             const auto v = h.kernel_integral(rate, t);
             return std::vector<double>(v.begin(), v.end());
           },
           py::arg("rate"), py::arg("transform") = "identity");

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("dt", &Trajectory::dt)
      .def_readonly("steps", &Trajectory::steps)
      .def_readonly("seed", &Trajectory::seed)
      .def_property_readonly("t", [](const Trajectory& t) {
        std::vector<double> times(t.steps + 1);
        for (std::size_t k = 0; k <= t.steps; ++k) times[k] = t.time(k);
        return matrix(times, 1).attr("ravel")();
      })
      .def_property_readonly("x", [](const Trajectory& t) { return matrix(t.x, t.dimension); })
      .def_property_readonly("w", [](const Trajectory& t) { return matrix(t.w, t.dimension); })
      .def_property_readonly("tau_r", [](const Trajectory& t) -> py::object {
        if (!t.tau_r) return py::none();
        return py::float_(t.time(t.tau_r->node));
      });

  m.def("simulate", &simulate, py::arg("drift"), py::arg("past"), py::arg("T"), py::arg("dt"), py::arg("seed"),
        py::arg("stopping_radius") = py::none(), py::arg("index") = 0,
        py::call_guard<py::gil_scoped_release>());

  m.def("simulate_with_increments",
        [](const DriftSpec& s, const PastHistory& past, double dt, const std::vector<double>& dw) {
          return simulate_with_increments(s, past, dt, dw);
        },
        py::arg("drift"), py::arg("past"), py::arg("dt"), py::arg("increments"));

  m.def("replay_residual", &replay_residual, py::arg("trajectory"), py::arg("drift"), py::arg("past"));

  m.def(
      "stationary",
      [](const DriftSpec& s, std::size_t n, double T, double dt, std::uint64_t seed, const std::string& mode,
         bool with_memory, std::size_t threads) {
        KbOptions o;
        o.mode = sampling_mode_from_string(mode);
        o.observable = with_memory ? Observable::state_and_memory : Observable::state;
        o.threads = threads;
        EmpiricalMeasure em;
        {
          py::gil_scoped_release release;
          em = kb_average(s, n, T, dt, seed, o);
        }
        return matrix(em.samples, em.dimension);
      },
      py::arg("drift"), py::arg("n"), py::arg("T"), py::arg("dt"), py::arg("seed"),
      py::arg("mode") = "uniform_time", py::arg("with_memory") = false, py::arg("threads") = 1);

  m.def("w1_distance", &w1_distance_1d, py::arg("a"), py::arg("b"));
  m.def("moment_bound", &moment_bound, py::arg("C1"), py::arg("C2"), py::arg("dimension") = 1);
  m.def("increment_tail_bound", &increment_tail_bound, py::arg("z"), py::arg("dt_gap"), py::arg("C3"),
        py::arg("M"), py::arg("dimension") = 1);

  m.def(
      "check_conditions",
      [](const DriftSpec& s, double domain_bound, std::size_t samples, std::uint64_t seed, std::size_t threads) {
        PathSamplerConfig c;
        c.samples = samples;
        c.pool_radius = domain_bound;
        c.seed = seed;
        double rate = 1.0;
        for (const auto& k : required_kernels(s)) rate = std::max(rate, k.rate);
        py::dict out;
        out["lipschitz"] = as_python(to_json(estimate_lipschitz(s, rate, c, domain_bound, threads)));
        out["dissipativity"] = as_python(to_json(estimate_dissipativity(s, c, domain_bound, 0.5, threads)));
        out["growth"] = as_python(to_json(estimate_growth(s, c, domain_bound, threads)));
        return out;
      },
      py::arg("drift"), py::arg("domain_bound") = 1.0, py::arg("samples") = 10000, py::arg("seed") = 1,
      py::arg("threads") = 1);

  m.def(
      "growth_diagnostic",
      [](const Trajectory& t, double delta, double delta0, double k_window) {
        GrowthOptions o;
        o.delta = delta;
        o.delta0 = delta0;
        o.k_window = k_window;
        return as_python(to_json(growth_diagnostic(t, o)));
      },
      py::arg("trajectory"), py::arg("delta") = 0.1, py::arg("delta0") = 0.05, py::arg("k_window") = 4.0);

  m.def(
      "girsanov",
      [](const Trajectory& t, const PastHistory& x, const PastHistory& y, const DriftSpec& s, double K,
         double K_prime, double rate, double rate_prime) {
        const auto p = drift_discrepancy(t, x, y, s, {K, K_prime, rate, rate_prime});
        py::dict out;
        out["times"] = p.times;
        out["discrepancy"] = p.magnitude;
        std::vector<double> env(p.times.size());
        for (std::size_t k = 0; k < env.size(); ++k) env[k] = p.bound_at(k);
        out["envelope"] = env;
        out["L"] = p.L;
        out["report"] = as_python(to_json(rn_density(t, p, novikov(p, t.horizon()))));
        return out;
      },
      py::arg("trajectory"), py::arg("x_past"), py::arg("y_past"), py::arg("drift"), py::arg("K"),
      py::arg("K_prime"), py::arg("rate"), py::arg("rate_prime"));

  m.def(
      "rn_density_ensemble",
      [](const DriftSpec& s, const PastHistory& x, const PastHistory& y, double T, double dt, std::uint64_t seed,
         std::size_t n, std::size_t threads) {
        DensityEnsemble e;
        {
          py::gil_scoped_release release;
          e = rn_density_ensemble(s, x, y, T, dt, seed, n, threads);
        }
        return as_python(to_json(e));
      },
      py::arg("drift"), py::arg("x_past"), py::arg("y_past"), py::arg("T"), py::arg("dt"), py::arg("seed"),
      py::arg("n"), py::arg("threads") = 1);

  m.def(
      "couple",
      [](const DriftSpec& s, const PastHistory& p1, const PastHistory& p2, double T, double dt,
         std::uint64_t seed, double window, double bound) {
        const auto r = couple(s, p1, p2, T, dt, seed, {window, bound, 0});
        py::dict out;
        out["times"] = r.times;
        out["discrepancy"] = r.discrepancy;
        out["average1"] = r.average1;
        out["average2"] = r.average2;
        out["final_gap"] = r.final_gap;
        return out;
      },
      py::arg("drift"), py::arg("past1"), py::arg("past2"), py::arg("T"), py::arg("dt"), py::arg("seed"),
      py::arg("window") = 1.0, py::arg("bound") = 10.0);

  m.def(
      "run",
      [](const std::string& command, const std::string& config_text, std::optional<std::string> out,
         std::optional<std::uint64_t> seed, std::size_t threads) {
        Overrides o;
        o.out = out;
        o.seed = seed;
        const auto cfg = apply_overrides(parse_config(config_text), o);
        std::ostringstream log;
        const int code = run_command(command, cfg, config_text, o, threads, log);
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = 1, "Runs a subcommand on config text; returns (exit_code, log).");

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_ArithmeticError);
}
