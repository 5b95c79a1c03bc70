#pragma once

#include <Eigen/Dense>

namespace fcplan {

// Second-order expansion of a stage cost l(x, u).
struct StageExpansion {
  double value = 0.0;
  Eigen::VectorXd lx;
  Eigen::VectorXd lu;
  Eigen::MatrixXd lxx;
  Eigen::MatrixXd luu;
  Eigen::MatrixXd lux;

  void resize(int nx, int nu) {
    lx.setZero(nx);
    lu.setZero(nu);
    lxx.setZero(nx, nx);
    luu.setZero(nu, nu);
    lux.setZero(nu, nx);
    value = 0.0;
  }
};

// Inequality rows g(x, u) <= 0 with their Jacobians.
struct ConstraintBlock {
  Eigen::VectorXd values;
  Eigen::MatrixXd jx;
  Eigen::MatrixXd ju;  // empty columns for terminal constraints
};

// Discrete-time finite-horizon problem as seen by the trajectory optimizer.
// Stage k = 0..N-1 carries (x_k, u_k); the terminal knot carries x_N only.
class ShootingProblem {
 public:
  virtual ~ShootingProblem() = default;

  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int horizon() const = 0;
  virtual Eigen::VectorXd initial_state() const = 0;

  virtual Eigen::VectorXd step(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  virtual void linearize(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         Eigen::MatrixXd& a, Eigen::MatrixXd& b) const = 0;

  virtual double stage_cost(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  virtual void stage_expansion(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               StageExpansion& out) const = 0;
  virtual double terminal_cost(const Eigen::VectorXd&) const { return 0.0; }
  virtual void terminal_expansion(const Eigen::VectorXd& x, Eigen::VectorXd& vx,
                                  Eigen::MatrixXd& vxx) const {
    vx.setZero(x.size());
    vxx.setZero(x.size(), x.size());
  }

  virtual int num_stage_constraints(int) const { return 0; }
  virtual void stage_constraints(int, const Eigen::VectorXd&, const Eigen::VectorXd&,
                                 ConstraintBlock&) const {}
  virtual int num_terminal_constraints() const { return 0; }
  virtual void terminal_constraints(const Eigen::VectorXd&, ConstraintBlock&) const {}

  // Projects a rolled-out input onto hard limits; returns true if it moved.
  virtual bool clamp_input(int, Eigen::VectorXd&) const { return false; }
};

}  // namespace fcplan
