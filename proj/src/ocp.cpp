#include "fcplan/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fcplan {

namespace {

constexpr double kPressureScale = 1e5;   // Pa
constexpr double kCurrentScale = 100.0;  // A
constexpr double kVoltageScale = 100.0;  // V
constexpr double kChargeScale = 1.0;     // A s
constexpr double kFlowScale = 0.01;      // kg/s

int row(ConstraintRow r) { return static_cast<int>(r); }

}  // namespace

void CostWeights::validate() const {
  if (!(w_ref > 0.0)) throw std::invalid_argument("W_ref must be positive");
  if (!(w_e >= 0.0)) throw std::invalid_argument("W_e must be non-negative");
  if (!w_s.isApprox(w_s.transpose())) throw std::invalid_argument("W_s must be symmetric");
  Eigen::LLT<Eigen::Matrix3d> llt(w_s);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("W_s must be positive definite");
}

void ConstraintSet::validate() const {
  if (!(v_cm_min <= v_cm_max) || !(i_st_min <= i_st_max) || !(i_bat_cmax <= i_bat_dmax)) {
    throw std::invalid_argument("input bounds must satisfy min <= max");
  }
  if (!(q_max >= 0.0)) throw std::invalid_argument("Q_max must be non-negative");
  if (!(lambda_min > 0.0)) throw std::invalid_argument("lambda_min must be positive");
  if (!(clamp_margin >= 0.0)) throw std::invalid_argument("clamp margin must be non-negative");
}

void OcpProblem::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (static_cast<int>(p_ref.size()) != horizon) {
    throw std::invalid_argument("demand window length must equal the horizon");
  }
  if (static_cast<int>(u_nominal.size()) != horizon) {
    throw std::invalid_argument("nominal input sequence length must equal the horizon");
  }
  if (!(cost_scale > 0.0)) throw std::invalid_argument("cost scale must be positive");
  weights.validate();
  constraints.validate();
}

const std::array<ConstraintRowInfo, kNumConstraintRows>& constraint_schema() {
  using D = RowDependence;
  static const std::array<ConstraintRowInfo, kNumConstraintRows> schema = {{
      {"starvation", kFlowScale, "kg/s", D::StateAndInput,
       "lambda_min * W_O2,reacted(I_st) - W_O2,in(x)"},
      {"choke", kPressureScale, "Pa", D::State, "a1 * psi_cm(omega_cp, p_sm) + b1 - p_sm"},
      {"surge", kPressureScale, "Pa", D::State, "p_sm - a2 * psi_cm(omega_cp, p_sm) - b2"},
      {"v_cm_min", kVoltageScale, "V", D::Input, "v_cm,min - v_cm"},
      {"v_cm_max", kVoltageScale, "V", D::Input, "v_cm - v_cm,max"},
      {"i_st_min", kCurrentScale, "A", D::Input, "I_st,min - I_st"},
      {"i_st_max", kCurrentScale, "A", D::Input, "I_st - I_st,max"},
      {"i_bat_charge", kCurrentScale, "A", D::Input, "I_bat,cmax - I_bat"},
      {"i_bat_discharge", kCurrentScale, "A", D::Input, "I_bat - I_bat,dmax"},
      {"discharge_budget", kChargeScale, "A s", D::State, "q_dis - Q_max"},
      {"p_o2_nonnegative", kPressureScale, "Pa", D::State, "-p_O2"},
      {"cathode_above_atm", kPressureScale, "Pa", D::State, "p_atm - (p_O2 + p_N2 + p_sat)"},
      {"manifold_above_atm", kPressureScale, "Pa", D::State, "p_atm - p_sm"},
  }};
  return schema;
}

ConstraintEval evaluate_constraints(const PlantModel& model, const State& x, const Input& u,
                                    const ConstraintSet& cs) {
  ConstraintEval e;
  e.values.setZero();
  e.jx.setZero();
  e.ju.setZero();
  const auto& fc = model.params().fc;
  const DerivedCoeffs& c = model.coeffs();

  {
    const int r = row(ConstraintRow::Starvation);
    const double o2_per_amp = model.oxygen_consumption(1.0);
    const double inflow_gain = c.o2_mass_fraction_in * fc.k_ca_in;
    e.values(r) = (cs.lambda_min * o2_per_amp * u(su::kIst) - model.oxygen_inflow(x)) / kFlowScale;
    e.jx(r, sx::kPO2) = inflow_gain / kFlowScale;
    e.jx(r, sx::kPN2) = inflow_gain / kFlowScale;
    e.jx(r, sx::kPsm) = -inflow_gain / kFlowScale;
    e.ju(r, su::kIst) = cs.lambda_min * o2_per_amp / kFlowScale;
  }

  const Scalar2 w = model.psi_cm(x(sx::kOmegaCp), x(sx::kPsm));
  {
    const int r = row(ConstraintRow::Choke);
    e.values(r) = (cs.choke_a * w.value + cs.choke_b - x(sx::kPsm)) / kPressureScale;
    e.jx(r, sx::kOmegaCp) = cs.choke_a * w.d_first / kPressureScale;
    e.jx(r, sx::kPsm) = (cs.choke_a * w.d_second - 1.0) / kPressureScale;
  }
  {
    const int r = row(ConstraintRow::Surge);
    e.values(r) = (x(sx::kPsm) - cs.surge_a * w.value - cs.surge_b) / kPressureScale;
    e.jx(r, sx::kOmegaCp) = -cs.surge_a * w.d_first / kPressureScale;
    e.jx(r, sx::kPsm) = (1.0 - cs.surge_a * w.d_second) / kPressureScale;
  }

  auto bound_rows = [&](ConstraintRow lo, ConstraintRow hi, int input, double min, double max,
                        double scale) {
    e.values(row(lo)) = (min - u(input)) / scale;
    e.ju(row(lo), input) = -1.0 / scale;
    e.values(row(hi)) = (u(input) - max) / scale;
    e.ju(row(hi), input) = 1.0 / scale;
  };
  bound_rows(ConstraintRow::VcmMin, ConstraintRow::VcmMax, su::kVcm, cs.v_cm_min, cs.v_cm_max,
             kVoltageScale);
  bound_rows(ConstraintRow::IstMin, ConstraintRow::IstMax, su::kIst, cs.i_st_min, cs.i_st_max,
             kCurrentScale);
  bound_rows(ConstraintRow::IbatCharge, ConstraintRow::IbatDischarge, su::kIbat, cs.i_bat_cmax,
             cs.i_bat_dmax, kCurrentScale);

  {
    const int r = row(ConstraintRow::DischargeBudget);
    e.values(r) = (x(sx::kQdis) - cs.q_max) / kChargeScale;
    e.jx(r, sx::kQdis) = 1.0 / kChargeScale;
  }
  {
    const int r = row(ConstraintRow::OxygenNonNegative);
    e.values(r) = -x(sx::kPO2) / kPressureScale;
    e.jx(r, sx::kPO2) = -1.0 / kPressureScale;
  }
  {
    const int r = row(ConstraintRow::CathodeAboveAtmosphere);
    e.values(r) = (fc.p_atm - model.cathode_pressure(x)) / kPressureScale;
    e.jx(r, sx::kPO2) = -1.0 / kPressureScale;
    e.jx(r, sx::kPN2) = -1.0 / kPressureScale;
  }
  {
    const int r = row(ConstraintRow::ManifoldAboveAtmosphere);
    e.values(r) = (fc.p_atm - x(sx::kPsm)) / kPressureScale;
    e.jx(r, sx::kPsm) = -1.0 / kPressureScale;
  }
  return e;
}

double stage_cost(const PlantModel& model, const State& x, const Input& u, const Input& du,
                  double p_ref, const CostWeights& w) {
  const double err = model.system_power(x, u) - p_ref;
  return w.w_ref * err * err + w.w_e * u(su::kIst) + du.dot(w.w_s * du);
}

CostExpansion cost_expansion(const PlantModel& model, const State& x, const Input& u,
                             const Input& du, double p_ref, const CostWeights& w) {
  CostExpansion e;
  const PowerGradient pg = model.system_power_gradient(x, u);
  const double err = pg.value - p_ref;
  e.value = w.w_ref * err * err + w.w_e * u(su::kIst) + du.dot(w.w_s * du);

  const Eigen::Matrix3d ws2 = w.w_s + w.w_s.transpose();
  e.lx = 2.0 * w.w_ref * err * pg.d_x;
  e.lu = 2.0 * w.w_ref * err * pg.d_u + ws2 * du;
  e.lu(su::kIst) += w.w_e;
  e.lxx = 2.0 * w.w_ref * pg.d_x * pg.d_x.transpose();
  e.luu = 2.0 * w.w_ref * pg.d_u * pg.d_u.transpose() + ws2;
  e.lux = 2.0 * w.w_ref * pg.d_u * pg.d_x.transpose();
  return e;
}

// ---------------------------------------------------------------------------

FcShootingProblem::FcShootingProblem(const PlantModel& model, OcpProblem problem)
    : model_(model),
      problem_(std::move(problem)),
      augmented_(problem_.increment == IncrementReference::PreviousInput) {
  problem_.validate();
}

Eigen::VectorXd FcShootingProblem::initial_state() const {
  if (!augmented_) return problem_.x0;
  Eigen::VectorXd z(kNumStates + kNumInputs);
  z << problem_.x0, problem_.u_prev;
  return z;
}

Eigen::VectorXd FcShootingProblem::step(int, const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& u) const {
  const State next = fcplan::step(model_, plant_state(z), Input(u), problem_.dt, problem_.substeps);
  if (!augmented_) return next;
  Eigen::VectorXd out(kNumStates + kNumInputs);
  out << next, u;
  return out;
}

void FcShootingProblem::linearize(int, const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                                  Eigen::MatrixXd& a, Eigen::MatrixXd& b) const {
  const DiscreteStep s =
      step_with_sensitivities(model_, plant_state(z), Input(u), problem_.dt, problem_.substeps);
  if (!augmented_) {
    a = s.a;
    b = s.b;
    return;
  }
  a.setZero(kNumStates + kNumInputs, kNumStates + kNumInputs);
  b.setZero(kNumStates + kNumInputs, kNumInputs);
  a.topLeftCorner<kNumStates, kNumStates>() = s.a;
  b.topRows<kNumStates>() = s.b;
  b.bottomRows<kNumInputs>().setIdentity();
}

Input FcShootingProblem::increment(int k, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& u) const {
  if (augmented_) return u - z.tail<kNumInputs>();
  return u - problem_.u_nominal[static_cast<std::size_t>(k)];
}

double FcShootingProblem::stage_cost(int k, const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& u) const {
  return problem_.cost_scale *
         fcplan::stage_cost(model_, plant_state(z), Input(u), increment(k, z, u),
                            problem_.p_ref[static_cast<std::size_t>(k)], problem_.weights);
}

void FcShootingProblem::stage_expansion(int k, const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& u, StageExpansion& out) const {
  const Input du = increment(k, z, u);
  const CostExpansion e = cost_expansion(model_, plant_state(z), Input(u), du,
                                         problem_.p_ref[static_cast<std::size_t>(k)],
                                         problem_.weights);
  out.resize(state_dim(), kNumInputs);
  out.value = e.value;
  out.lx.head<kNumStates>() = e.lx;
  out.lu = e.lu;
  out.lxx.topLeftCorner<kNumStates, kNumStates>() = e.lxx;
  out.luu = e.luu;
  out.lux.leftCols<kNumStates>() = e.lux;
  if (augmented_) {
    // du = u - v with v the carried previous input
    const Eigen::Matrix3d ws2 = problem_.weights.w_s + problem_.weights.w_s.transpose();
    out.lx.tail<kNumInputs>() = -ws2 * du;
    out.lxx.bottomRightCorner<kNumInputs, kNumInputs>() = ws2;
    out.lux.rightCols<kNumInputs>() = -ws2;
  }
  const double c = problem_.cost_scale;
  out.value *= c;
  out.lx *= c;
  out.lu *= c;
  out.lxx *= c;
  out.luu *= c;
  out.lux *= c;
}

const std::vector<int>& FcShootingProblem::stage_rows(int k) {
  static const std::vector<int> first = {0, 3, 4, 5, 6, 7, 8};
  static const std::vector<int> all = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  return k == 0 ? first : all;
}

const std::vector<int>& FcShootingProblem::terminal_rows() {
  static const std::vector<int> rows = {1, 2, 9, 10, 11, 12};
  return rows;
}

int FcShootingProblem::num_stage_constraints(int k) const {
  return static_cast<int>(stage_rows(k).size());
}

int FcShootingProblem::num_terminal_constraints() const {
  return static_cast<int>(terminal_rows().size());
}

void FcShootingProblem::stage_constraints(int k, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u, ConstraintBlock& out) const {
  const ConstraintEval e =
      evaluate_constraints(model_, plant_state(x), Input(u), problem_.constraints);
  const auto& rows = stage_rows(k);
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.values.resize(m);
  out.jx.setZero(m, state_dim());
  out.ju.resize(m, kNumInputs);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.values(i) = e.values(r);
    out.jx.row(i).head<kNumStates>() = e.jx.row(r);
    out.ju.row(i) = e.ju.row(r);
  }
}

void FcShootingProblem::terminal_constraints(const Eigen::VectorXd& x,
                                             ConstraintBlock& out) const {
  // Terminal rows are state-only; the input argument is irrelevant.
  const ConstraintEval e = evaluate_constraints(model_, plant_state(x), problem_.u_nominal.back(),
                                                problem_.constraints);
  const auto& rows = terminal_rows();
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.values.resize(m);
  out.jx.setZero(m, state_dim());
  out.ju.resize(m, 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.values(i) = e.values(r);
    out.jx.row(i).head<kNumStates>() = e.jx.row(r);
  }
}

bool FcShootingProblem::clamp_input(int, Eigen::VectorXd& u) const {
  // The AL rows own the bounds; the clamp only stops excursions well past
  // them, so that the rows still see the violation they have to price.
  const ConstraintSet& cs = problem_.constraints;
  const Input lo = cs.lower_bounds();
  const Input hi = cs.upper_bounds();
  const Input scale(kVoltageScale, kCurrentScale, kCurrentScale);
  bool moved = false;
  for (int i = 0; i < kNumInputs; ++i) {
    double a = lo(i) - cs.clamp_margin * scale(i);
    const double b = hi(i) + cs.clamp_margin * scale(i);
    // negative compressor voltage or stack current mean nothing to the plant
    if (i != su::kIbat) a = std::max(a, 0.0);
    const double c = std::clamp(u(i), a, b);
    if (c != u(i)) moved = true;
    u(i) = c;
  }
  return moved;
}

Multipliers FcShootingProblem::shift_multipliers(const Multipliers& m, int horizon) {
  Multipliers out = m;
  const auto n = static_cast<std::size_t>(horizon);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (k == 0) {
      const auto& rows = stage_rows(0);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        out.lambda[0](static_cast<Eigen::Index>(i)) = m.lambda[1](rows[i]);
        out.penalty[0](static_cast<Eigen::Index>(i)) = m.penalty[1](rows[i]);
      }
    } else {
      out.lambda[k] = m.lambda[k + 1];
      out.penalty[k] = m.penalty[k + 1];
    }
  }
  return out;
}

Trajectory rollout_plant_inputs(const FcShootingProblem& p, const std::vector<Input>& inputs) {
  std::vector<Eigen::VectorXd> u;
  u.reserve(inputs.size());
  for (const auto& v : inputs) u.emplace_back(v);
  return AlIlqrSolver{}.rollout(p, u);
}

std::vector<Input> shift_inputs(const std::vector<Eigen::VectorXd>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("shift_inputs: empty sequence");
  std::vector<Input> out;
  out.reserve(inputs.size());
  for (std::size_t k = 1; k < inputs.size(); ++k) out.emplace_back(inputs[k]);
  out.emplace_back(inputs.back());
  return out;
}

}  // namespace fcplan
