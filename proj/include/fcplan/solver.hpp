#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcplan/shooting_problem.hpp"

namespace fcplan {

struct Trajectory {
  std::vector<Eigen::VectorXd> states;  // N + 1
  std::vector<Eigen::VectorXd> inputs;  // N
};

struct SolverOptions {
  int max_outer_iterations = 20;
  int max_inner_iterations = 100;
  double reg_initial = 0.0;
  double reg_min = 1e-8;
  double reg_max = 1e10;
  double reg_increase = 2.0;
  double reg_decrease = 0.5;
  int line_search_steps = 11;   // alpha = 1, 1/2, ..., 2^-(steps-1)
  double armijo = 1e-4;
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  double violation_decrease = 0.25;  // a row's penalty grows unless g shrank by this factor
  double penalty_max = 1e8;
  double multiplier_max = 1e8;
  double tol_cost = 1e-6;       // relative AL-objective change
  double tol_grad = 1e-6;       // max |k_ff| relative to input scale
  double tol_viol = 1e-4;       // max scaled constraint violation
  bool record_trace = true;
};

enum class SolveStatus { Converged, MaxIter, LineSearchFailed, NumericalError };

const char* to_string(SolveStatus s);

struct TraceEntry {
  int outer = 0;
  int inner = 0;
  double cost = 0.0;          // objective without AL terms
  double al_objective = 0.0;  // after the step
  double violation = 0.0;
  double regularization = 0.0;
  double alpha = 0.0;
  bool accepted = false;
};

// Constraint multipliers per stage plus the terminal block (last entry).
struct Multipliers {
  std::vector<Eigen::VectorXd> lambda;
  std::vector<Eigen::VectorXd> penalty;
};

struct SolveResult {
  Trajectory trajectory;
  double cost = 0.0;
  double al_objective = 0.0;
  double max_violation = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  int clamp_events = 0;  // inputs moved by the hard clamp in the last accepted pass
  Multipliers multipliers;
  std::vector<TraceEntry> trace;
};

struct Gains {
  std::vector<Eigen::VectorXd> feedforward;
  std::vector<Eigen::MatrixXd> feedback;
  double dv1 = 0.0;  // expected change = alpha * dv1 + alpha^2 * dv2
  double dv2 = 0.0;
  bool ok = false;
};

struct ForwardResult {
  Trajectory trajectory;
  double al_objective = 0.0;
  double alpha = 0.0;
  bool accepted = false;
  int clamp_events = 0;
};

// Augmented-Lagrangian iLQR over a ShootingProblem. One instance owns its
// workspace; use separate instances for concurrent solves.
class AlIlqrSolver {
 public:
  explicit AlIlqrSolver(SolverOptions options = {}) : opts_(options) {}

  const SolverOptions& options() const { return opts_; }

  // Dynamically feasible rollout of the given inputs from x0.
  Trajectory rollout(const ShootingProblem& p, const std::vector<Eigen::VectorXd>& inputs) const;

  Multipliers initial_multipliers(const ShootingProblem& p) const;

  double objective(const ShootingProblem& p, const Trajectory& t) const;
  double al_objective(const ShootingProblem& p, const Trajectory& t, const Multipliers& m) const;
  double max_violation(const ShootingProblem& p, const Trajectory& t) const;
  // max over rows of min(lambda, -g): zero when every multiplier sits on an
  // active row.
  double complementarity(const ShootingProblem& p, const Trajectory& t, const Multipliers& m) const;

  Gains backward_pass(const ShootingProblem& p, const Trajectory& nominal, const Multipliers& m,
                      double reg) const;
  // Closed-loop rollout u = u_bar + alpha k + K (x - x_bar), clamped.
  Trajectory apply_gains(const ShootingProblem& p, const Trajectory& nominal, const Gains& gains,
                         double alpha, int* clamps = nullptr) const;
  ForwardResult forward_pass(const ShootingProblem& p, const Trajectory& nominal,
                             const Gains& gains, const Multipliers& m, double nominal_objective,
                             const std::vector<double>& step_sizes) const;

  std::vector<double> step_sizes() const;

  SolveResult solve(const ShootingProblem& p, const Trajectory& init,
                    const Multipliers* warm_multipliers = nullptr) const;

 private:
  SolverOptions opts_;
};

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace);

}  // namespace fcplan
