#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcplan/plant.hpp"
#include "fcplan/shooting_problem.hpp"
#include "fcplan/solver.hpp"

namespace fcplan {

// Time-varying LQ problem with affine terms:
//   x_{k+1} = A_k x_k + B_k u_k + c_k
//   l_k = 1/2 x'Q x + q'x + 1/2 u'R u + r'u + u'S x,  l_N = 1/2 x'Qf x + qf'x
struct LqData {
  Eigen::VectorXd x0;
  std::vector<Eigen::MatrixXd> a, b, q, r, s;
  std::vector<Eigen::VectorXd> c, qv, rv;
  Eigen::MatrixXd qf;
  Eigen::VectorXd qfv;

  int nx() const { return static_cast<int>(x0.size()); }
  int nu() const { return static_cast<int>(b.front().cols()); }
  int horizon() const { return static_cast<int>(a.size()); }
};

LqData random_lq(std::mt19937_64& rng, int nx, int nu, int horizon);

class LqProblem final : public ShootingProblem {
 public:
  explicit LqProblem(LqData data) : d_(std::move(data)) {}
  const LqData& data() const { return d_; }

  int state_dim() const override { return d_.nx(); }
  int input_dim() const override { return d_.nu(); }
  int horizon() const override { return d_.horizon(); }
  Eigen::VectorXd initial_state() const override { return d_.x0; }
  Eigen::VectorXd step(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  void linearize(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd& a,
                 Eigen::MatrixXd& b) const override;
  double stage_cost(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  void stage_expansion(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       StageExpansion& out) const override;
  double terminal_cost(const Eigen::VectorXd& x) const override;
  void terminal_expansion(const Eigen::VectorXd& x, Eigen::VectorXd& vx,
                          Eigen::MatrixXd& vxx) const override;

 private:
  LqData d_;
};

// Plain backward Riccati recursion and forward simulation.
Trajectory riccati_oracle(const LqData& d);

// Random state/input pair near a steady operating point, with every
// constraint-relevant quantity physical.
struct SamplePoint {
  State x;
  Input u;
};
SamplePoint sample_admissible_point(const PlantModel& model, std::mt19937_64& rng);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;   // the measured statistic
  std::string bound;    // what it was held to
  double seconds = 0.0;
  std::string detail;
};

struct SelfcheckOptions {
  std::uint64_t seed = 1;
  int lq_instances = 20;
  int jacobian_points = 100;
  // Negative control: perturbs the sensitivity Jacobian before comparison.
  bool corrupt_jacobian = false;
  PlantParams plant;
};

CheckResult check_riccati_equivalence(const SelfcheckOptions& o);
CheckResult check_jacobian_fidelity(const SelfcheckOptions& o);
CheckResult check_integrator_order(const SelfcheckOptions& o);

std::vector<CheckResult> run_selfchecks(const SelfcheckOptions& o);
std::string format_checks(const std::vector<CheckResult>& rows);

}  // namespace fcplan
