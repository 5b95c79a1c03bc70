#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fcplan/ocp.hpp"
#include "fcplan/solver.hpp"
#include "support.hpp"

using namespace fcplan;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Whole-horizon LQ solved as one dense QP in the stacked inputs.
std::vector<VectorXd> condensed_qp(const LqData& d) {
  const int nx = d.nx(), nu = d.nu(), n = d.horizon();
  const int m = nu * n;
  MatrixXd g = MatrixXd::Zero(nx, m);
  VectorXd h = d.x0;
  MatrixXd hess = MatrixXd::Zero(m, m);
  VectorXd grad = VectorXd::Zero(m);
  for (int k = 0; k < n; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    MatrixXd e = MatrixXd::Zero(nu, m);
    e.block(0, k * nu, nu, nu).setIdentity();
    hess += g.transpose() * d.q[ks] * g + e.transpose() * d.r[ks] * e +
            e.transpose() * d.s[ks] * g + g.transpose() * d.s[ks].transpose() * e;
    grad += g.transpose() * (d.q[ks] * h + d.qv[ks]) + e.transpose() * (d.rv[ks] + d.s[ks] * h);
    const MatrixXd g_next = d.a[ks] * g + d.b[ks] * e;
    h = (d.a[ks] * h + d.c[ks]).eval();
    g = g_next;
  }
  hess += g.transpose() * d.qf * g;
  grad += g.transpose() * (d.qf * h + d.qfv);
  const VectorXd u = hess.ldlt().solve(-grad);
  std::vector<VectorXd> out;
  for (int k = 0; k < n; ++k) out.push_back(u.segment(k * nu, nu));
  return out;
}

// Feedback gains of the textbook discrete Riccati recursion.
std::vector<MatrixXd> lqr_gains(const LqData& d) {
  MatrixXd p = d.qf;
  std::vector<MatrixXd> k(static_cast<std::size_t>(d.horizon()));
  for (int j = d.horizon() - 1; j >= 0; --j) {
    const auto js = static_cast<std::size_t>(j);
    const MatrixXd& a = d.a[js];
    const MatrixXd& b = d.b[js];
    const MatrixXd h = d.r[js] + b.transpose() * p * b;
    const MatrixXd gs = d.s[js] + b.transpose() * p * a;
    k[js] = -h.ldlt().solve(gs);
    p = d.q[js] + a.transpose() * p * a - gs.transpose() * h.ldlt().solve(gs);
    p = (0.5 * (p + p.transpose())).eval();
  }
  return k;
}

std::vector<VectorXd> zero_inputs(const ShootingProblem& p) {
  return std::vector<VectorXd>(static_cast<std::size_t>(p.horizon()), VectorXd::Zero(p.input_dim()));
}

double max_rel(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b) {
  double scale = 1e-12, err = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    scale = std::max(scale, b[k].cwiseAbs().maxCoeff());
    err = std::max(err, (a[k] - b[k]).cwiseAbs().maxCoeff());
  }
  return err / scale;
}

// x+ = x + u, cost u^2 / 2, rows 1 - u <= 0 and u - 10 <= 0. Optimum u = 1
// with multiplier 1 on the first row, 0 on the second.
class ToyProblem final : public ShootingProblem {
 public:
  int state_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  int horizon() const override { return 3; }
  VectorXd initial_state() const override { return VectorXd::Zero(1); }
  VectorXd step(int, const VectorXd& x, const VectorXd& u) const override { return x + u; }
  void linearize(int, const VectorXd&, const VectorXd&, MatrixXd& a, MatrixXd& b) const override {
    a = MatrixXd::Identity(1, 1);
    b = MatrixXd::Identity(1, 1);
  }
  double stage_cost(int, const VectorXd&, const VectorXd& u) const override { return 0.5 * u.squaredNorm(); }
  void stage_expansion(int k, const VectorXd& x, const VectorXd& u, StageExpansion& out) const override {
    out.resize(1, 1);
    out.value = stage_cost(k, x, u);
    out.lu = u;
    out.luu.setIdentity();
  }
  int num_stage_constraints(int) const override { return 2; }
  void stage_constraints(int, const VectorXd&, const VectorXd& u, ConstraintBlock& out) const override {
    out.values = Eigen::Vector2d(1.0 - u(0), u(0) - 10.0);
    out.jx = MatrixXd::Zero(2, 1);
    out.ju = Eigen::Vector2d(-1.0, 1.0);
  }
};

struct FcWindow {
  PlantModel model;
  OperatingPoint op;
  OcpProblem prob;
};

FcWindow step_window(double q_max) {
  FcWindow w;
  InitialStatePolicy pol;
  w.op = steady_state(w.model, 30000.0, pol);
  w.prob.x0 = w.op.x;
  w.prob.u_nominal.assign(10, w.op.u);
  w.prob.p_ref = {30000, 30000, 30000, 30000, 30000, 37500, 37500, 37500, 37500, 37500};
  w.prob.cost_scale = 1e-4;
  w.prob.constraints.q_max = q_max;
  return w;
}

}  // namespace

TEST(BackwardPass, LqGainsEqualRiccatiGains) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const LqProblem lq(random_lq(rng, 4, 2, 8));
    const AlIlqrSolver solver;
    const Trajectory nominal = solver.rollout(lq, zero_inputs(lq));
    const Gains g = solver.backward_pass(lq, nominal, solver.initial_multipliers(lq), 0.0);
    ASSERT_TRUE(g.ok);
    const auto k = lqr_gains(lq.data());
    for (std::size_t j = 0; j < k.size(); ++j) {
      EXPECT_LT((g.feedback[j] - k[j]).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, k[j].cwiseAbs().maxCoeff()));
    }
  }
}

TEST(BackwardPass, ZeroCostGivesZeroGains) {
  std::mt19937_64 rng(4);
  LqData d = random_lq(rng, 3, 2, 5);
  for (auto& m : d.q) m.setZero();
  for (auto& m : d.r) m.setZero();
  for (auto& m : d.s) m.setZero();
  for (auto& v : d.qv) v.setZero();
  for (auto& v : d.rv) v.setZero();
  d.qf.setZero();
  d.qfv.setZero();
  const LqProblem lq(d);
  const AlIlqrSolver solver;
  const Trajectory nominal = solver.rollout(lq, zero_inputs(lq));
  const Gains g = solver.backward_pass(lq, nominal, solver.initial_multipliers(lq), 1e-6);
  ASSERT_TRUE(g.ok);
  for (std::size_t j = 0; j < g.feedback.size(); ++j) {
    EXPECT_EQ(g.feedforward[j].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.feedback[j].cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(g.dv1, 0.0);
  EXPECT_EQ(g.dv2, 0.0);
}

TEST(BackwardPass, BudgetMultiplierPushesTowardLessDischarge) {
  FcWindow w = step_window(72.0);
  w.prob.u_nominal.assign(10, Input(w.op.u(0), w.op.u(1), 10.0));
  // budget exactly used up by the nominal, so lambda + mu g = lambda
  w.prob.constraints.q_max = 10.0 * 10 * w.prob.dt;
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const Trajectory nominal = rollout_plant_inputs(sp, w.prob.u_nominal);
  ASSERT_NEAR(nominal.states.back()(sx::kQdis), w.prob.constraints.q_max, 1e-12);
  Multipliers free = solver.initial_multipliers(sp);
  Multipliers priced = free;
  // terminal block: rows {choke, surge, budget, ...}
  priced.lambda.back()(2) = 1.0;
  const Gains a = solver.backward_pass(sp, nominal, free, 0.0);
  const Gains b = solver.backward_pass(sp, nominal, priced, 0.0);
  ASSERT_TRUE(a.ok && b.ok);
  for (std::size_t k = 0; k < a.feedforward.size(); ++k) {
    EXPECT_LT(b.feedforward[k](su::kIbat), a.feedforward[k](su::kIbat)) << k;
  }
}

TEST(BackwardPass, IndefiniteInputHessianIsANumericalError) {
  LqData d;
  d.x0 = VectorXd::Ones(2);
  for (int k = 0; k < 3; ++k) {
    d.a.push_back(MatrixXd::Identity(2, 2));
    d.b.push_back(MatrixXd::Identity(2, 1));
    d.c.push_back(VectorXd::Zero(2));
    d.q.push_back(MatrixXd::Zero(2, 2));
    d.r.push_back(-MatrixXd::Identity(1, 1));
    d.s.push_back(MatrixXd::Zero(1, 2));
    d.qv.push_back(VectorXd::Zero(2));
    d.rv.push_back(VectorXd::Ones(1));
  }
  d.qf = MatrixXd::Zero(2, 2);
  d.qfv = VectorXd::Zero(2);
  const LqProblem lq(d);
  SolverOptions o;
  o.reg_max = 1e-3;
  const AlIlqrSolver solver(o);
  EXPECT_FALSE(solver.backward_pass(lq, solver.rollout(lq, zero_inputs(lq)), solver.initial_multipliers(lq), 0.0).ok);
  const SolveResult r = solver.solve(lq, solver.rollout(lq, zero_inputs(lq)));
  EXPECT_EQ(r.status, SolveStatus::NumericalError);
}

TEST(ForwardPass, ZeroStepReproducesTheNominal) {
  FcWindow w = step_window(72.0);
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const Trajectory nominal = rollout_plant_inputs(sp, w.prob.u_nominal);
  const Gains g = solver.backward_pass(sp, nominal, solver.initial_multipliers(sp), 0.0);
  ASSERT_TRUE(g.ok);
  const Trajectory t = solver.apply_gains(sp, nominal, g, 0.0);
  for (std::size_t k = 0; k < nominal.states.size(); ++k) {
    for (int i = 0; i < kNumStates; ++i) EXPECT_EQ(t.states[k](i), nominal.states[k](i));
  }
  for (std::size_t k = 0; k < nominal.inputs.size(); ++k) {
    for (int i = 0; i < kNumInputs; ++i) EXPECT_EQ(t.inputs[k](i), nominal.inputs[k](i));
  }
}

TEST(ForwardPass, FullStepAcceptedFirstOnLq) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const LqProblem lq(random_lq(rng, 3, 2, 6));
    const AlIlqrSolver solver;
    const Trajectory nominal = solver.rollout(lq, zero_inputs(lq));
    const Multipliers m = solver.initial_multipliers(lq);
    const Gains g = solver.backward_pass(lq, nominal, m, 0.0);
    const ForwardResult f = solver.forward_pass(lq, nominal, g, m, solver.al_objective(lq, nominal, m), solver.step_sizes());
    ASSERT_TRUE(f.accepted);
    EXPECT_EQ(f.alpha, 1.0);
    // the quadratic model is exact
    const double predicted = -(g.dv1 + g.dv2);
    EXPECT_NEAR(solver.al_objective(lq, nominal, m) - f.al_objective, predicted, 1e-9 * std::abs(predicted));
  }
}

TEST(ForwardPass, AcceptedStepLowersTheObjective) {
  FcWindow w = step_window(72.0);
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const Trajectory nominal = rollout_plant_inputs(sp, w.prob.u_nominal);
  const Multipliers m = solver.initial_multipliers(sp);
  const double j0 = solver.al_objective(sp, nominal, m);
  const Gains g = solver.backward_pass(sp, nominal, m, 0.0);
  ASSERT_TRUE(g.ok);
  const ForwardResult f = solver.forward_pass(sp, nominal, g, m, j0, solver.step_sizes());
  ASSERT_TRUE(f.accepted);
  EXPECT_LT(f.al_objective, j0);
}

TEST(Solve, UnconstrainedLqMatchesCondensedQp) {
  std::mt19937_64 rng(1);
  SolverOptions o;
  o.tol_cost = 1e-12;
  o.tol_grad = 1e-10;
  const AlIlqrSolver solver(o);
  for (int seed = 0; seed < 20; ++seed) {
    const LqProblem lq(random_lq(rng, 4, 2, 10));
    const SolveResult r = solver.solve(lq, solver.rollout(lq, zero_inputs(lq)));
    EXPECT_EQ(r.status, SolveStatus::Converged);
    EXPECT_EQ(r.outer_iterations, 1);
    EXPECT_LE(r.inner_iterations, 2);
    const auto oracle = condensed_qp(lq.data());
    EXPECT_LT(max_rel(r.trajectory.inputs, oracle), 1e-8) << seed;
    // and the library's own Riccati oracle agrees with the dense solve
    EXPECT_LT(max_rel(riccati_oracle(lq.data()).inputs, oracle), 1e-8) << seed;
  }
}

TEST(Solve, ToyProblemRecoversKktMultiplier) {
  const ToyProblem toy;
  const AlIlqrSolver solver;
  const SolveResult r = solver.solve(toy, solver.rollout(toy, zero_inputs(toy)));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (const auto& u : r.trajectory.inputs) EXPECT_NEAR(u(0), 1.0, 1e-4);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.multipliers.lambda[static_cast<std::size_t>(k)](0), 1.0, 1e-3);
    EXPECT_EQ(r.multipliers.lambda[static_cast<std::size_t>(k)](1), 0.0);
    // an inactive row never has its penalty raised
    EXPECT_EQ(r.multipliers.penalty[static_cast<std::size_t>(k)](1), solver.options().penalty_initial);
  }
  EXPECT_LE(r.max_violation, solver.options().tol_viol);
  EXPECT_LE(solver.complementarity(toy, r.trajectory, r.multipliers), solver.options().tol_viol);
}

TEST(Solve, StaleMultiplierOnSlackRowIsDrained) {
  const ToyProblem toy;
  const AlIlqrSolver solver;
  Multipliers m = solver.initial_multipliers(toy);
  for (int k = 0; k < 3; ++k) m.lambda[static_cast<std::size_t>(k)](1) = 5.0;  // pretends the upper bound is active
  const SolveResult r = solver.solve(toy, solver.rollout(toy, zero_inputs(toy)), &m);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (const auto& u : r.trajectory.inputs) EXPECT_NEAR(u(0), 1.0, 1e-4);
  for (int k = 0; k < 3; ++k) EXPECT_LE(r.multipliers.lambda[static_cast<std::size_t>(k)](1), 1e-4);
}

TEST(Solve, ZeroBudgetForbidsDischarge) {
  FcWindow w = step_window(0.0);
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const SolveResult r = solver.solve(sp, rollout_plant_inputs(sp, w.prob.u_nominal));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (const auto& x : r.trajectory.states) EXPECT_LE(x(sx::kQdis), solver.options().tol_viol);
  for (std::size_t k = 0; k < r.trajectory.inputs.size(); ++k) {
    const double room = solver.options().tol_viol - r.trajectory.states[k](sx::kQdis);
    EXPECT_LE(r.trajectory.inputs[k](su::kIbat) * w.prob.dt, room + 1e-12) << k;
  }
}

TEST(Solve, DemandStepWindowKeepsOxygenExcess) {
  FcWindow w = step_window(72.0);
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const SolveResult r = solver.solve(sp, rollout_plant_inputs(sp, w.prob.u_nominal));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (std::size_t k = 0; k < r.trajectory.inputs.size(); ++k) {
    const double lam = w.model.oxygen_excess_ratio(FcShootingProblem::plant_state(r.trajectory.states[k]),
                                                   Input(r.trajectory.inputs[k]));
    EXPECT_GE(lam, 1.5 - 1e-3) << k;
  }
  // the battery helps across the step
  double discharge = 0.0;
  for (const auto& u : r.trajectory.inputs) discharge = std::max(discharge, u(su::kIbat));
  EXPECT_GT(discharge, 0.0);
}

TEST(Solve, InvariantsOnTheFuelCellWindow) {
  FcWindow w = step_window(3.6);
  const FcShootingProblem sp(w.model, w.prob);
  const AlIlqrSolver solver;
  const SolveResult r = solver.solve(sp, rollout_plant_inputs(sp, w.prob.u_nominal));
  ASSERT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(r.max_violation, solver.options().tol_viol);

  // accepted iterates never raise the AL objective within an outer step
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    if (r.trace[i].outer == r.trace[i - 1].outer) {
      EXPECT_LE(r.trace[i].al_objective, r.trace[i - 1].al_objective) << i;
    }
  }
  // bit-exact dynamic feasibility
  const auto& t = r.trajectory;
  for (std::size_t k = 0; k + 1 < t.states.size(); ++k) {
    const Eigen::VectorXd next = sp.step(static_cast<int>(k), t.states[k], t.inputs[k]);
    for (int i = 0; i < kNumStates; ++i) EXPECT_EQ(next(i), t.states[k + 1](i));
  }
  // re-solving from the answer changes nothing material
  const SolveResult again = solver.solve(sp, r.trajectory, &r.multipliers);
  EXPECT_EQ(again.status, SolveStatus::Converged);
  EXPECT_LE(std::abs(again.cost - r.cost), solver.options().tol_cost * (1.0 + std::abs(r.cost)));
}

TEST(Solve, IterationCapReturnsBestSoFar) {
  FcWindow w = step_window(3.6);
  const FcShootingProblem sp(w.model, w.prob);
  SolverOptions o;
  o.max_outer_iterations = 1;
  o.max_inner_iterations = 2;
  const AlIlqrSolver solver(o);
  const Trajectory init = rollout_plant_inputs(sp, w.prob.u_nominal);
  const SolveResult r = solver.solve(sp, init);
  EXPECT_EQ(r.status, SolveStatus::MaxIter);
  ASSERT_EQ(r.trajectory.inputs.size(), 10u);
  EXPECT_LE(r.al_objective, solver.al_objective(sp, init, solver.initial_multipliers(sp)));
}

TEST(Solve, StatusNames) {
  EXPECT_STREQ(to_string(SolveStatus::Converged), "Converged");
  EXPECT_STREQ(to_string(SolveStatus::MaxIter), "MaxIter");
  EXPECT_STREQ(to_string(SolveStatus::LineSearchFailed), "LineSearchFailed");
  EXPECT_STREQ(to_string(SolveStatus::NumericalError), "NumericalError");
}

TEST(Solve, TraceCsvHasOneRowPerAcceptedStep) {
  const ToyProblem toy;
  const AlIlqrSolver solver;
  const SolveResult r = solver.solve(toy, solver.rollout(toy, zero_inputs(toy)));
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "outer,inner,cost,al_objective,violation,regularization,alpha");
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), r.trace.size() + 1);
}
