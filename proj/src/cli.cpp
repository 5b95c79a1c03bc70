#include "fcplan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcplan/config.hpp"
#include "fcplan/ocp.hpp"
#include "fcplan/selfcheck.hpp"

namespace fcplan {

namespace fs = std::filesystem;

namespace {

struct Manifest {
  std::string config_path;
  std::string out_dir = "out";
  bool out_given = false;
  std::string budgets;
  bool budgets_given = false;
  std::uint64_t seed = 1;
  bool emit_plots = false;
  bool corrupt_jacobian = false;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

fs::path prepare_out(const Manifest& m) {
  const fs::path dir(m.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + m.out_dir);
  return dir;
}

std::string budget_label(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", q);
  return buf;
}

ScenarioConfig load(const Manifest& m) {
  return m.config_path.empty() ? ScenarioConfig{} : load_config(m.config_path);
}

std::string ledger_text(const ScenarioConfig& cfg) {
  return model_ledger(cfg.plant, derive_coefficients(cfg.plant));
}

const char* kSimPlot = R"(import csv, sys
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sim.csv"
rows = list(csv.DictReader(open(path)))
col = lambda k: [float(r[k]) for r in rows]
t = col("t")
fig, ax = plt.subplots(4, 1, sharex=True, figsize=(7, 9))
ax[0].plot(t, col("P_sys"), label="P_sys")
ax[0].step(t, col("P_ref"), where="post", label="P_ref")
ax[0].set_ylabel("W")
ax[0].legend()
for k, name in (("u1", "v_cm [V]"), ("u2", "I_st [A]"), ("u3", "I_bat [A]")):
    ax[1].plot(t, col(k), label=name)
ax[1].legend()
ax[2].plot(t, col("x8"))
ax[2].set_ylabel("q_dis [A s]")
ax[3].plot(t, col("lambda_O2"))
ax[3].set_ylabel("lambda_O2")
ax[3].set_xlabel("t [s]")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
)";

const char* kSweepPlot = R"(import csv, glob
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

summary = list(csv.DictReader(open("sweep_summary.csv")))
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].plot([float(r["q_max_As"]) for r in summary], [float(r["h2_total_g"]) for r in summary], "o-")
ax[0].set_xlabel("Q_max [A s]")
ax[0].set_ylabel("H2 [g]")
for path in sorted(glob.glob("sim_q*.csv")):
    rows = list(csv.DictReader(open(path)))
    ax[1].plot([float(r["t"]) for r in rows], [float(r["x8"]) for r in rows], label=path[5:-4])
ax[1].set_xlabel("t [s]")
ax[1].set_ylabel("q_dis [A s]")
ax[1].legend(title="Q_max")
fig.tight_layout()
fig.savefig("sweep.png", dpi=120)
)";

int cmd_simulate(const Manifest& m, std::ostream& out) {
  ScenarioConfig cfg = load(m);
  if (m.budgets_given) {
    const auto b = parse_number_list(m.budgets);
    if (b.size() != 1) throw ConfigError("simulate takes a single budget");
    cfg.constraints.q_max = b.front();
    cfg.validate();
  }
  const fs::path dir = prepare_out(m);
  const SimLog log = run_closed_loop(cfg);
  std::ostringstream csv;
  write_sim_csv(csv, log);
  write_file(dir / "sim.csv", csv.str());
  const std::string summary = summary_text(cfg, log);
  write_file(dir / "summary.txt", summary);
  write_file(dir / "model_ledger.txt", ledger_text(cfg));
  if (m.emit_plots) write_file(dir / "plot_sim.py", kSimPlot);
  out << summary;
  return log.aborted || log.non_converged_steps() > 0 ? kExitNotConverged : kExitOk;
}

int cmd_sweep(const Manifest& m, std::ostream& out) {
  const ScenarioConfig cfg = load(m);
  const std::vector<double> budgets = m.budgets_given ? parse_number_list(m.budgets) : cfg.budgets;
  if (budgets.empty()) throw ConfigError("sweep needs at least one budget");
  for (double b : budgets) {
    if (!(b >= 0.0)) throw ConfigError("budgets must be non-negative");
  }
  const fs::path dir = prepare_out(m);
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::vector<SweepRow> rows = sweep_qmax(cfg, budgets, jobs);
  std::string summary;
  bool ok = true;
  for (const auto& r : rows) {
    std::ostringstream csv;
    write_sim_csv(csv, r.log);
    write_file(dir / ("sim_q" + budget_label(r.q_max) + ".csv"), csv.str());
    ScenarioConfig c = cfg;
    c.constraints.q_max = r.q_max;
    summary += "== Q_max " + budget_label(r.q_max) + "\n" + summary_text(c, r.log);
    if (!r.error.empty()) summary += "error              " + r.error + "\n";
    ok = ok && r.ok;
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_file(dir / "sweep_summary.csv", csv.str());
  write_file(dir / "summary.txt", summary);
  write_file(dir / "model_ledger.txt", ledger_text(cfg));
  if (m.emit_plots) write_file(dir / "plot_sweep.py", kSweepPlot);
  out << summary;
  return ok ? kExitOk : kExitNotConverged;
}

int cmd_describe(const Manifest& m, std::ostream& out) {
  const ScenarioConfig cfg = load(m);
  const std::string json = constraints_json(cfg);
  if (m.out_given) write_file(prepare_out(m) / "constraints.json", json);
  out << json;
  return kExitOk;
}

int cmd_selfcheck(const Manifest& m, std::ostream& out) {
  const ScenarioConfig cfg = load(m);
  SelfcheckOptions o;
  o.seed = m.seed;
  o.corrupt_jacobian = m.corrupt_jacobian;
  o.plant = cfg.plant;
  const auto rows = run_selfchecks(o);
  const std::string table = format_checks(rows);
  if (m.out_given) write_file(prepare_out(m) / "selfcheck.txt", table);
  out << table;
  const bool pass = std::all_of(rows.begin(), rows.end(), [](const CheckResult& r) { return r.pass; });
  return pass ? kExitOk : kExitCheckFailed;
}

std::string dependence_name(RowDependence d) {
  switch (d) {
    case RowDependence::StateAndInput: return "state_and_input";
    case RowDependence::State: return "state";
    case RowDependence::Input: return "input";
  }
  return "unknown";
}

}  // namespace

std::string constraints_json(const ScenarioConfig& cfg) {
  using nlohmann::json;
  auto member = [](const std::vector<int>& rows, int r) {
    return std::find(rows.begin(), rows.end(), r) != rows.end();
  };
  json rows = json::array();
  const auto& schema = constraint_schema();
  for (int r = 0; r < kNumConstraintRows; ++r) {
    const auto& info = schema[static_cast<std::size_t>(r)];
    json applied = json::array();
    if (member(FcShootingProblem::stage_rows(0), r)) applied.push_back("stage_0");
    if (member(FcShootingProblem::stage_rows(1), r)) applied.push_back("stages_1_to_N-1");
    if (member(FcShootingProblem::terminal_rows(), r)) applied.push_back("terminal");
    rows.push_back({{"index", r},
                    {"name", std::string(info.name)},
                    {"scale", info.scale},
                    {"unit", std::string(info.unit)},
                    {"depends_on", dependence_name(info.dependence)},
                    {"expression", std::string(info.expression)},
                    {"applied_at", applied}});
  }
  const ConstraintSet& cs = cfg.constraints;
  json doc = {
      {"convention", "g(x, u) <= 0 is feasible; each residual is divided by its scale"},
      {"horizon", cfg.horizon},
      {"rows", rows},
      {"parameters",
       {{"lambda_min", cs.lambda_min},
        {"choke_a", cs.choke_a},
        {"choke_b", cs.choke_b},
        {"surge_a", cs.surge_a},
        {"surge_b", cs.surge_b},
        {"v_cm_min", cs.v_cm_min},
        {"v_cm_max", cs.v_cm_max},
        {"i_st_min", cs.i_st_min},
        {"i_st_max", cs.i_st_max},
        {"i_bat_cmax", cs.i_bat_cmax},
        {"i_bat_dmax", cs.i_bat_dmax},
        {"q_max", cs.q_max},
        {"clamp_margin", cs.clamp_margin}}},
  };
  return doc.dump(2) + "\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Receding-horizon power split for a fuel-cell/battery system"};
  app.require_subcommand(1);
  app.fallthrough();
  Manifest m;
  app.add_option("--config", m.config_path, "Configuration file (key = value)");
  auto* out_opt = app.add_option("--out", m.out_dir, "Output directory");
  auto* budget_opt = app.add_option("--budgets", m.budgets, "Comma-separated Q_max list [A s]");
  app.add_option("--seed", m.seed, "Seed for the randomized self-checks");
  app.add_flag("--emit-plots", m.emit_plots, "Also write matplotlib scripts next to the CSVs");
  app.add_flag("--corrupt-jacobian", m.corrupt_jacobian)->group("");

  auto* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
  auto* sweep = app.add_subcommand("sweep", "Run the scenario once per budget");
  auto* describe = app.add_subcommand("describe-constraints", "Print the constraint schema as JSON");
  auto* check = app.add_subcommand("selfcheck", "Riccati, Jacobian and integration-order checks");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  m.out_given = out_opt->count() > 0;
  m.budgets_given = budget_opt->count() > 0;

  try {
    if (sim->parsed()) return cmd_simulate(m, out);
    if (sweep->parsed()) return cmd_sweep(m, out);
    if (describe->parsed()) return cmd_describe(m, out);
    if (check->parsed()) return cmd_selfcheck(m, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fcplan
