#pragma once

#include <array>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fcplan/discretize.hpp"
#include "fcplan/plant.hpp"
#include "fcplan/shooting_problem.hpp"
#include "fcplan/solver.hpp"

namespace fcplan {

struct CostWeights {
  double w_ref = 100.0;   // per W^2 of tracking error
  double w_e = 0.01;      // per A of stack current
  Eigen::Matrix3d w_s = Eigen::Vector3d(1.0, 1.0, 0.01).asDiagonal();  // input increments

  void validate() const;
};

struct ConstraintSet {
  double lambda_min = 1.5;
  // choke: p_sm >= a1 * W_cp + b1; surge: p_sm <= a2 * W_cp + b2  [Pa, kg/s]
  double choke_a = 1.0e6;
  double choke_b = 0.0;
  double surge_a = 2.5e6;
  double surge_b = 1.6e5;
  double v_cm_min = 0.0;
  double v_cm_max = 300.0;
  double i_st_min = 0.0;
  double i_st_max = 616.0;
  double i_bat_cmax = -36.0;
  double i_bat_dmax = 36.0;
  double q_max = 72.0;      // discharge budget [A s]
  // Rollout clamp sits this far outside the input bounds, in row scales.
  double clamp_margin = 0.1;

  void validate() const;
  Input lower_bounds() const { return {v_cm_min, i_st_min, i_bat_cmax}; }
  Input upper_bounds() const { return {v_cm_max, i_st_max, i_bat_dmax}; }
};

// Row order of evaluate_constraints. Every row is g <= 0 when feasible.
enum class ConstraintRow : int {
  Starvation = 0,
  Choke,
  Surge,
  VcmMin,
  VcmMax,
  IstMin,
  IstMax,
  IbatCharge,
  IbatDischarge,
  DischargeBudget,
  OxygenNonNegative,
  CathodeAboveAtmosphere,
  ManifoldAboveAtmosphere,
};

inline constexpr int kNumConstraintRows = 13;

enum class RowDependence { StateAndInput, State, Input };

struct ConstraintRowInfo {
  std::string_view name;
  double scale;            // residual divided by this magnitude
  std::string_view unit;
  RowDependence dependence;
  std::string_view expression;
};

const std::array<ConstraintRowInfo, kNumConstraintRows>& constraint_schema();

struct ConstraintEval {
  Eigen::Matrix<double, kNumConstraintRows, 1> values;
  Eigen::Matrix<double, kNumConstraintRows, kNumStates> jx;
  Eigen::Matrix<double, kNumConstraintRows, kNumInputs> ju;
};

ConstraintEval evaluate_constraints(const PlantModel& model, const State& x, const Input& u,
                                    const ConstraintSet& cs);

double stage_cost(const PlantModel& model, const State& x, const Input& u, const Input& du,
                  double p_ref, const CostWeights& w);

// Gauss-Newton expansion of stage_cost in (x, u); du = u - u_nominal with
// the nominal held fixed, so d(du)/du = I.
struct CostExpansion {
  double value = 0.0;
  State lx = State::Zero();
  Input lu = Input::Zero();
  StateJacobian lxx = StateJacobian::Zero();
  Eigen::Matrix3d luu = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, kNumInputs, kNumStates> lux = Eigen::Matrix<double, kNumInputs, kNumStates>::Zero();
};

CostExpansion cost_expansion(const PlantModel& model, const State& x, const Input& u,
                             const Input& du, double p_ref, const CostWeights& w);

// What the input increment du in l_s is measured against.
enum class IncrementReference {
  Nominal,        // the previous plan shifted by one sample (held fixed in a solve)
  PreviousInput,  // u_{k-1}, with u_prev before the window
};

struct OcpProblem {
  int horizon = 10;
  double dt = 0.05;
  int substeps = kDefaultSubsteps;
  State x0 = State::Zero();
  // Nominal inputs of this window (the previous plan, shifted); the l_s term
  // penalizes departures from them. Length horizon.
  std::vector<Input> u_nominal;
  IncrementReference increment = IncrementReference::Nominal;
  Input u_prev = Input::Zero();  // for PreviousInput: input applied before the window
  std::vector<double> p_ref;     // length horizon
  CostWeights weights;
  ConstraintSet constraints;
  // Objective multiplier seen by the solver; keeps multipliers of the
  // scaled rows in a range the penalty cap can reach.
  double cost_scale = 1.0;

  void validate() const;
};

// The OCP as a shooting problem. State-only rows are imposed on x_1..x_N
// (x_0 is fixed); input rows on u_0..u_{N-1}. With PreviousInput the solver
// state is [x; u_{k-1}] so the increment penalty stays a stage cost.
class FcShootingProblem final : public ShootingProblem {
 public:
  FcShootingProblem(const PlantModel& model, OcpProblem problem);

  const OcpProblem& problem() const { return problem_; }
  const PlantModel& model() const { return model_; }

  int state_dim() const override { return augmented_ ? kNumStates + kNumInputs : kNumStates; }
  int input_dim() const override { return kNumInputs; }
  int horizon() const override { return problem_.horizon; }
  Eigen::VectorXd initial_state() const override;

  Eigen::VectorXd step(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  void linearize(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& a,
                 Eigen::MatrixXd& b) const override;
  double stage_cost(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  void stage_expansion(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       StageExpansion& out) const override;

  int num_stage_constraints(int k) const override;
  void stage_constraints(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         ConstraintBlock& out) const override;
  int num_terminal_constraints() const override;
  void terminal_constraints(const Eigen::VectorXd& x, ConstraintBlock& out) const override;

  bool clamp_input(int k, Eigen::VectorXd& u) const override;

  // Row indices (into ConstraintRow order) active at stage k / at the terminal.
  static const std::vector<int>& stage_rows(int k);
  static const std::vector<int>& terminal_rows();

  // Receding-horizon warm start: knot k of the result takes knot k+1 of m.
  static Multipliers shift_multipliers(const Multipliers& m, int horizon);

  // Plant part of a solver state.
  static State plant_state(const Eigen::VectorXd& z) { return z.head<kNumStates>(); }

 private:
  Input increment(int k, const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

  const PlantModel& model_;
  OcpProblem problem_;
  bool augmented_ = false;
};

// Clamped rollout of plant inputs from the problem's x0.
Trajectory rollout_plant_inputs(const FcShootingProblem& p, const std::vector<Input>& inputs);

// Nominal for the next sampling instant: drop the first input, repeat the last.
std::vector<Input> shift_inputs(const std::vector<Eigen::VectorXd>& inputs);

}  // namespace fcplan
