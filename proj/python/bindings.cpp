#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fcplan/cli.hpp"
#include "fcplan/config.hpp"
#include "fcplan/discretize.hpp"
#include "fcplan/mpc.hpp"
#include "fcplan/selfcheck.hpp"

namespace py = pybind11;
using namespace fcplan;

namespace {

ScenarioConfig from_text(const std::string& text) { return text.empty() ? ScenarioConfig{} : parse_config(text); }

// Column-oriented view of a closed-loop log.
py::dict log_to_dict(const SimLog& log) {
  const Eigen::Index n = static_cast<Eigen::Index>(log.records.size());
  Eigen::VectorXd t(n), p_sys(n), p_ref(n), lambda(n), h2(n);
  Eigen::MatrixXd x(n, kNumStates), u(n, kNumInputs);
  std::vector<std::string> status;
  std::vector<int> iters;
  for (Eigen::Index k = 0; k < n; ++k) {
    const SimRecord& r = log.records[static_cast<std::size_t>(k)];
    t(k) = r.t;
    x.row(k) = r.x.transpose();
    u.row(k) = r.u.transpose();
    p_sys(k) = r.p_sys;
    p_ref(k) = r.p_ref;
    lambda(k) = r.lambda_o2;
    h2(k) = r.h2_cum;
    status.emplace_back(to_string(r.status));
    iters.push_back(r.inner_iterations);
  }
  py::dict d;
  d["t"] = t;
  d["x"] = x;
  d["u"] = u;
  d["p_sys"] = p_sys;
  d["p_ref"] = p_ref;
  d["lambda_o2"] = lambda;
  d["h2_cum"] = h2;
  d["status"] = status;
  d["inner_iterations"] = iters;
  d["h2_total_kg"] = log.h2_total_kg;
  d["q_dis_final"] = log.q_dis_final;
  d["max_violation"] = log.max_violation();
  d["tracking_rms"] = log.tracking_rms();
  d["aborted"] = log.aborted;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Receding-horizon fuel-cell/battery power split";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PlantError>(m, "PlantError", PyExc_RuntimeError);

  m.attr("NUM_STATES") = kNumStates;
  m.attr("NUM_INPUTS") = kNumInputs;
  m.attr("NUM_CONSTRAINT_ROWS") = kNumConstraintRows;

  py::class_<PlantModel>(m, "Plant")
      .def(py::init([](const std::string& text) { return PlantModel(from_text(text).plant); }),
           py::arg("config_text") = "")
      .def("dynamics", &PlantModel::dynamics, py::arg("x"), py::arg("u"))
      .def("jacobians",
           [](const PlantModel& p, const State& x, const Input& u) {
             StateJacobian a;
             InputJacobian b;
             p.jacobians(x, u, a, b);
             return py::make_tuple(a, b);
           },
           py::arg("x"), py::arg("u"))
      .def("system_power", &PlantModel::system_power, py::arg("x"), py::arg("u"))
      .def("oxygen_excess_ratio", &PlantModel::oxygen_excess_ratio, py::arg("x"), py::arg("u"))
      .def("hydrogen_rate", &PlantModel::hydrogen_rate, py::arg("i_st"))
      .def("cathode_pressure", &PlantModel::cathode_pressure, py::arg("x"))
      .def("stack_voltage", &PlantModel::stack_voltage, py::arg("p_o2"), py::arg("i_st"))
      .def("coefficients", [](const PlantModel& p) {
        const auto& c = p.coeffs().c;
        return std::vector<double>(c.begin(), c.end());
      })
      .def("step",
           [](const PlantModel& p, const State& x, const Input& u, double dt, int substeps) {
             return step(p, x, u, dt, substeps);
           },
           py::arg("x"), py::arg("u"), py::arg("dt"), py::arg("substeps") = kDefaultSubsteps)
      .def("steady_state",
           [](const PlantModel& p, double power, double lambda_target) {
             InitialStatePolicy pol;
             pol.lambda_target = lambda_target;
             const OperatingPoint op = steady_state(p, power, pol);
             return py::make_tuple(op.x, op.u);
           },
           py::arg("power"), py::arg("lambda_target") = 1.55);

  m.def("default_config_text", [] { return config_text(ScenarioConfig{}); });
  m.def("normalize_config", [](const std::string& text) { return config_text(parse_config(text)); },
        py::arg("text"));
  m.def("config_keys", &config_keys);

  m.def("simulate",
        [](const std::string& text, py::object q_max) {
          ScenarioConfig cfg = from_text(text);
          if (!q_max.is_none()) cfg.constraints.q_max = q_max.cast<double>();
          SimLog log;
          {
            py::gil_scoped_release unlock;
            log = run_closed_loop(cfg);
          }
          return log_to_dict(log);
        },
        py::arg("config_text") = "", py::arg("q_max") = py::none());

  m.def("sweep",
        [](const std::vector<double>& budgets, const std::string& text, int jobs) {
          const ScenarioConfig cfg = from_text(text);
          std::vector<SweepRow> rows;
          {
            py::gil_scoped_release unlock;
            rows = sweep_qmax(cfg, budgets, jobs);
          }
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["q_max"] = r.q_max;
            d["h2_total_g"] = r.h2_total_g;
            d["q_dis_final"] = r.q_dis_final;
            d["max_violation"] = r.max_violation;
            d["tracking_rms"] = r.tracking_rms;
            d["ok"] = r.ok;
            out.append(d);
          }
          return out;
        },
        py::arg("budgets"), py::arg("config_text") = "", py::arg("jobs") = 1);

  m.def("constraints_json", [](const std::string& text) { return constraints_json(from_text(text)); },
        py::arg("config_text") = "");

  m.def("selfcheck",
        [](std::uint64_t seed) {
          SelfcheckOptions o;
          o.seed = seed;
          py::list out;
          for (const auto& r : run_selfchecks(o)) {
            py::dict d;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["value"] = r.value;
            d["bound"] = r.bound;
            out.append(d);
          }
          return out;
        },
        py::arg("seed") = 1);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int rc = run_cli(args, out, err);
          return py::make_tuple(rc, out.str(), err.str());
        },
        py::arg("args"));
}
