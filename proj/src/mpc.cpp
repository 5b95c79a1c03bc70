#include "fcplan/mpc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fcplan/discretize.hpp"

namespace fcplan {

void DemandProfile::validate() const {
  if (breakpoints.empty()) throw std::invalid_argument("demand profile needs at least one breakpoint");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i].second >= 0.0)) throw std::invalid_argument("demand levels must be >= 0");
    if (i > 0 && !(breakpoints[i].first > breakpoints[i - 1].first)) {
      throw std::invalid_argument("demand breakpoints must be strictly increasing in time");
    }
  }
  if (!(preview >= 0.0) || !(preview_offset >= 0.0)) {
    throw std::invalid_argument("preview times must be non-negative");
  }
}

double DemandProfile::level(double t) const {
  double v = breakpoints.front().second;
  for (const auto& [time, value] : breakpoints) {
    // small slack so t = k dt lands on a breakpoint despite rounding
    if (t + 1e-9 >= time) v = value;
    else break;
  }
  return v;
}

std::vector<double> DemandProfile::step_times() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (breakpoints[i].second != breakpoints[i - 1].second) out.push_back(breakpoints[i].first);
  }
  return out;
}

std::vector<double> preview_window(const DemandProfile& profile, double t, int n, double dt) {
  if (n < 1 || !(dt > 0.0)) throw std::invalid_argument("preview_window: bad n or dt");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)] = profile.level(t + profile.preview_offset + k * dt);
  }
  return w;
}

void ScenarioConfig::validate() const {
  demand.validate();
  weights.validate();
  constraints.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (model_substeps < 1 || plant_substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (duration + 1e-9 < horizon * dt) throw std::invalid_argument("duration must be >= N dt");
  if (!(initial.v_soc >= 0.0 && initial.v_soc <= 1.0)) throw std::invalid_argument("initial v_soc outside [0, 1]");
  if (!(initial.lambda_target > 1.0)) throw std::invalid_argument("initial lambda target must exceed 1");
  if (solver.penalty_growth <= 1.0) throw std::invalid_argument("penalty growth must exceed 1");
}

int ScenarioConfig::num_steps() const {
  return static_cast<int>(std::lround(duration / dt));
}

// ---------------------------------------------------------------------------

namespace {

State rest_state(const PlantModel& model, double v_soc) {
  const auto& fc = model.params().fc;
  const double dry = fc.p_atm - model.coeffs()(2);
  State x = State::Zero();
  x(sx::kPO2) = fc.y_o2_atm * dry;
  x(sx::kPN2) = (1.0 - fc.y_o2_atm) * dry;
  x(sx::kPsm) = fc.p_atm;
  x(sx::kVsoc) = v_soc;
  return x;
}

// Unknowns z = (p_O2, p_N2, omega, p_sm, v_cm, I_st).
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

const Vec6& residual_scale() {
  static const Vec6 s = (Vec6() << 1e5, 1e5, 1e3, 1e5, 1e3, 1e-3).finished();
  return s;
}

void unpack(const Vec6& z, const State& base, State& x, Input& u) {
  x = base;
  x.head<4>() = z.head<4>();
  u = Input(z(4), z(5), 0.0);
}

Vec6 equilibrium_residual(const PlantModel& model, const Vec6& z, const State& base,
                          double power, double lambda) {
  State x;
  Input u;
  unpack(z, base, x, u);
  Vec6 r;
  r.head<4>() = model.fc_dynamics(x, u);
  r(4) = model.system_power(x, u) - power;
  r(5) = model.oxygen_inflow(x) - lambda * model.oxygen_consumption(u(su::kIst));
  return r.cwiseQuotient(residual_scale());
}

Mat6 equilibrium_jacobian(const PlantModel& model, const Vec6& z, const State& base,
                          double lambda) {
  State x;
  Input u;
  unpack(z, base, x, u);
  StateJacobian a;
  InputJacobian b;
  model.jacobians(x, u, a, b);
  Mat6 j = Mat6::Zero();
  j.block<4, 4>(0, 0) = a.block<4, 4>(0, 0);
  j.block<4, 2>(0, 4) = b.block<4, 2>(0, 0);
  const PowerGradient pg = model.system_power_gradient(x, u);
  j.block<1, 4>(4, 0) = pg.d_x.head<4>().transpose();
  j(4, 4) = pg.d_u(0);
  j(4, 5) = pg.d_u(1);
  const double gain = model.coeffs().o2_mass_fraction_in * model.params().fc.k_ca_in;
  j(5, 0) = -gain;
  j(5, 1) = -gain;
  j(5, 3) = gain;
  j(5, 5) = -lambda * model.oxygen_consumption(1.0);
  for (int i = 0; i < 6; ++i) j.row(i) /= residual_scale()(i);
  return j;
}

}  // namespace

OperatingPoint steady_state(const PlantModel& model, double power, const InitialStatePolicy& p) {
  OperatingPoint op;
  op.x = rest_state(model, p.v_soc);
  if (power <= 0.0) return op;

  // Start from the equilibrium of a mid-load input held for a long time.
  State x = op.x;
  const Input u_guess(150.0, 200.0, 0.0);
  for (int i = 0; i < 400; ++i) x = step(model, x, u_guess, 0.05);
  Vec6 z;
  z << x.head<4>(), u_guess(0), u_guess(1);
  const State base = op.x;

  auto norm_at = [&](const Vec6& zz) {
    try {
      return equilibrium_residual(model, zz, base, power, p.lambda_target).norm();
    } catch (const PlantError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double f = norm_at(z);
  for (int it = 0; it < 100 && f > 1e-10; ++it) {
    const Vec6 r = equilibrium_residual(model, z, base, power, p.lambda_target);
    const Mat6 j = equilibrium_jacobian(model, z, base, p.lambda_target);
    const Vec6 dz = -j.colPivHouseholderQr().solve(r);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      Vec6 trial = z + alpha * dz;
      if ((trial.array() < 0.0).any()) continue;
      const double ft = norm_at(trial);
      if (ft < f) {
        z = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(f <= 1e-8)) {
    throw PlantError("no fuel-cell equilibrium found for the initial demand");
  }
  unpack(z, base, op.x, op.u);
  return op;
}

// ---------------------------------------------------------------------------

int SimLog::non_converged_steps() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [](const SimRecord& r) {
    return r.status != SolveStatus::Converged;
  }));
}

int SimLog::clamp_activations() const {
  int n = 0;
  for (const auto& r : records) n += r.clamp_events;
  return n;
}

double SimLog::max_violation() const {
  double v = 0.0;
  for (const auto& r : records) v = std::max(v, r.residuals.maxCoeff());
  return v;
}

double SimLog::tracking_rms() const {
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += (r.p_sys - r.p_ref) * (r.p_sys - r.p_ref);
  return std::sqrt(s / static_cast<double>(records.size()));
}

namespace {

bool trace_monotone(const std::vector<TraceEntry>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].outer == trace[i - 1].outer &&
        trace[i].al_objective > trace[i - 1].al_objective) {
      return false;
    }
  }
  return true;
}

}  // namespace

SimLog run_closed_loop(const ScenarioConfig& cfg) {
  cfg.validate();
  const PlantModel model(cfg.plant);
  const AlIlqrSolver solver(cfg.solver);
  const int steps = cfg.num_steps();
  const int n = cfg.horizon;

  const OperatingPoint op = steady_state(model, cfg.demand.level(0.0), cfg.initial);
  State x = op.x;
  Input u_prev = op.u;
  std::vector<Input> warm(static_cast<std::size_t>(n), op.u);
  Multipliers multipliers;
  bool have_multipliers = false;

  SimLog log;
  log.records.reserve(static_cast<std::size_t>(steps));
  double h2 = 0.0;

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.dt;
    OcpProblem prob;
    prob.horizon = n;
    prob.dt = cfg.dt;
    prob.substeps = cfg.model_substeps;
    prob.x0 = x;
    prob.u_nominal = warm;
    prob.increment = cfg.increment;
    prob.u_prev = u_prev;
    prob.p_ref = preview_window(cfg.demand, t, n, cfg.dt);
    prob.weights = cfg.weights;
    prob.cost_scale = cfg.cost_scale;
    prob.constraints = cfg.constraints;
    const FcShootingProblem sp(model, prob);

    Trajectory init;
    init.inputs.assign(warm.begin(), warm.end());
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult res = solver.solve(sp, init, have_multipliers ? &multipliers : nullptr);
    const auto t1 = std::chrono::steady_clock::now();

    SimRecord rec;
    rec.t = t;
    rec.x = x;
    rec.status = res.status;
    rec.outer_iterations = res.outer_iterations;
    rec.inner_iterations = res.inner_iterations;
    rec.solver_violation = res.max_violation;
    rec.clamp_events = res.clamp_events;
    rec.al_monotone = trace_monotone(res.trace);
    if (cfg.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }

    if (res.status == SolveStatus::NumericalError) {
      log.aborted = true;
      log.abort_reason = "solver numerical error at t = " + std::to_string(t);
      break;
    }
    Input u;
    if (res.status == SolveStatus::LineSearchFailed) {
      u = u_prev;
      rec.fallback = true;
    } else {
      u = res.trajectory.inputs.front();
    }
    {
      // Applied inputs always respect the bounds; a cut larger than the AL
      // tolerance counts as a clamp activation.
      const Input lo = cfg.constraints.lower_bounds();
      const Input hi = cfg.constraints.upper_bounds();
      const Input c = u.cwiseMax(lo).cwiseMin(hi);
      if (((c - u).array().abs() > cfg.solver.tol_viol * 100.0).any()) ++rec.clamp_events;
      u = c;
    }
    rec.u = u;
    rec.p_ref = cfg.demand.level(t);
    rec.residuals = evaluate_constraints(model, x, u, cfg.constraints).values;
    try {
      rec.p_sys = model.system_power(x, u);
      x = step(model, x, u, cfg.dt, cfg.plant_substeps);
    } catch (const std::exception& e) {
      log.aborted = true;
      log.abort_reason = std::string("plant failure: ") + e.what();
      break;
    }
    rec.lambda_o2 = model.oxygen_excess_ratio(rec.x, u);
    h2 += cfg.dt * model.hydrogen_rate(u(su::kIst));
    rec.h2_cum = h2;
    log.records.push_back(rec);

    // Receding-horizon warm start.
    if (!rec.fallback) {
      warm = shift_inputs(res.trajectory.inputs);
      multipliers = FcShootingProblem::shift_multipliers(res.multipliers, n);
      for (auto& mu : multipliers.penalty) mu.setConstant(cfg.solver.penalty_initial);
      have_multipliers = true;
    }
    u_prev = u;
  }
  log.h2_total_kg = h2;
  log.q_dis_final = x(sx::kQdis);
  return log;
}

std::vector<SweepRow> sweep_qmax(const ScenarioConfig& cfg, const std::vector<double>& budgets,
                                 int jobs) {
  if (budgets.empty()) throw std::invalid_argument("sweep needs at least one budget");
  for (double b : budgets) {
    if (!(b >= 0.0)) throw std::invalid_argument("budgets must be non-negative");
  }
  std::vector<SweepRow> rows(budgets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < budgets.size(); i = next++) {
      SweepRow& row = rows[i];
      row.q_max = budgets[i];
      try {
        ScenarioConfig c = cfg;
        c.constraints.q_max = budgets[i];
        row.log = run_closed_loop(c);
        row.h2_total_g = 1e3 * row.log.h2_total_kg;
        row.q_dis_final = row.log.q_dis_final;
        row.max_violation = row.log.max_violation();
        row.tracking_rms = row.log.tracking_rms();
        row.ok = !row.log.aborted && row.log.non_converged_steps() == 0;
        if (row.log.aborted) row.error = row.log.abort_reason;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  const int workers = std::clamp(jobs, 1, static_cast<int>(budgets.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_sim_csv(std::ostream& os, const SimLog& log) {
  os << "t,x1,x2,x3,x4,x5,x6,x7,x8,u1,u2,u3,P_sys,P_ref,lambda_O2,h2_cum,status,iters,wall_ms\n";
  for (const auto& r : log.records) {
    os << num(r.t);
    for (int i = 0; i < kNumStates; ++i) os << ',' << num(r.x(i));
    for (int i = 0; i < kNumInputs; ++i) os << ',' << num(r.u(i));
    os << ',' << num(r.p_sys) << ',' << num(r.p_ref) << ',' << num(r.lambda_o2) << ','
       << num(r.h2_cum) << ',' << to_string(r.status) << ',' << r.inner_iterations << ','
       << num(r.wall_ms) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "q_max_As,h2_total_g,q_dis_final_As,max_violation,tracking_rms_W\n";
  for (const auto& r : rows) {
    os << num(r.q_max) << ',' << num(r.h2_total_g) << ',' << num(r.q_dis_final) << ','
       << num(r.max_violation) << ',' << num(r.tracking_rms) << '\n';
  }
}

std::string summary_text(const ScenarioConfig& cfg, const SimLog& log) {
  std::ostringstream os;
  os << "steps              " << log.records.size() << " of " << cfg.num_steps() << '\n';
  os << "Q_max [A s]        " << num(cfg.constraints.q_max) << '\n';
  os << "total H2 [g]       " << num(1e3 * log.h2_total_kg) << '\n';
  os << "final q_dis [A s]  " << num(log.q_dis_final) << '\n';
  os << "max violation      " << num(log.max_violation()) << '\n';
  os << "tracking RMS [W]   " << num(log.tracking_rms()) << '\n';
  os << "non-converged      " << log.non_converged_steps() << '\n';
  os << "clamp activations  " << log.clamp_activations() << '\n';
  if (log.aborted) os << "aborted            " << log.abort_reason << '\n';
  return os.str();
}

}  // namespace fcplan
