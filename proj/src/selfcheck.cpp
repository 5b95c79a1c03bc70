#include "fcplan/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "fcplan/discretize.hpp"
#include "fcplan/mpc.hpp"

namespace fcplan {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

MatrixXd random_spd(std::mt19937_64& rng, int n, double floor) {
  const MatrixXd g = gaussian(rng, n, n);
  return g * g.transpose() / n + floor * MatrixXd::Identity(n, n);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

LqData random_lq(std::mt19937_64& rng, int nx, int nu, int horizon) {
  LqData d;
  d.x0 = gaussian(rng, nx, 1);
  for (int k = 0; k < horizon; ++k) {
    d.a.push_back(MatrixXd::Identity(nx, nx) + 0.3 * gaussian(rng, nx, nx) / std::sqrt(nx));
    d.b.push_back(gaussian(rng, nx, nu));
    d.c.push_back(0.1 * gaussian(rng, nx, 1));
    d.q.push_back(random_spd(rng, nx, 0.1));
    d.r.push_back(random_spd(rng, nu, 0.5));
    // small cross term keeps the joint stage Hessian positive definite
    d.s.push_back(0.05 * gaussian(rng, nu, nx));
    d.qv.push_back(gaussian(rng, nx, 1));
    d.rv.push_back(gaussian(rng, nu, 1));
  }
  d.qf = random_spd(rng, nx, 0.5);
  d.qfv = gaussian(rng, nx, 1);
  return d;
}

VectorXd LqProblem::step(int k, const VectorXd& x, const VectorXd& u) const {
  const auto ks = static_cast<std::size_t>(k);
  return d_.a[ks] * x + d_.b[ks] * u + d_.c[ks];
}

void LqProblem::linearize(int k, const VectorXd&, const VectorXd&, MatrixXd& a, MatrixXd& b) const {
  a = d_.a[static_cast<std::size_t>(k)];
  b = d_.b[static_cast<std::size_t>(k)];
}

double LqProblem::stage_cost(int k, const VectorXd& x, const VectorXd& u) const {
  const auto ks = static_cast<std::size_t>(k);
  return 0.5 * x.dot(d_.q[ks] * x) + d_.qv[ks].dot(x) + 0.5 * u.dot(d_.r[ks] * u) +
         d_.rv[ks].dot(u) + u.dot(d_.s[ks] * x);
}

void LqProblem::stage_expansion(int k, const VectorXd& x, const VectorXd& u,
                                StageExpansion& out) const {
  const auto ks = static_cast<std::size_t>(k);
  out.value = stage_cost(k, x, u);
  out.lx = d_.q[ks] * x + d_.qv[ks] + d_.s[ks].transpose() * u;
  out.lu = d_.r[ks] * u + d_.rv[ks] + d_.s[ks] * x;
  out.lxx = d_.q[ks];
  out.luu = d_.r[ks];
  out.lux = d_.s[ks];
}

double LqProblem::terminal_cost(const VectorXd& x) const {
  return 0.5 * x.dot(d_.qf * x) + d_.qfv.dot(x);
}

void LqProblem::terminal_expansion(const VectorXd& x, VectorXd& vx, MatrixXd& vxx) const {
  vx = d_.qf * x + d_.qfv;
  vxx = d_.qf;
}

Trajectory riccati_oracle(const LqData& d) {
  const int n = d.horizon();
  std::vector<MatrixXd> gain(static_cast<std::size_t>(n));
  std::vector<VectorXd> offset(static_cast<std::size_t>(n));
  MatrixXd p = d.qf;
  VectorXd s = d.qfv;
  for (int k = n - 1; k >= 0; --k) {
    const auto i = static_cast<std::size_t>(k);
    const MatrixXd& a = d.a[i];
    const MatrixXd& b = d.b[i];
    const VectorXd sc = s + p * d.c[i];
    const MatrixXd h = d.r[i] + b.transpose() * p * b;
    const MatrixXd g = d.s[i] + b.transpose() * p * a;
    const VectorXd hv = d.rv[i] + b.transpose() * sc;
    const Eigen::LDLT<MatrixXd> f(h);
    gain[i] = -f.solve(g);
    offset[i] = -f.solve(hv);
    s = d.qv[i] + a.transpose() * sc + g.transpose() * offset[i];
    p = d.q[i] + a.transpose() * p * a + g.transpose() * gain[i];
    p = 0.5 * (p + p.transpose());
  }
  Trajectory t;
  t.states.push_back(d.x0);
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const VectorXd& x = t.states.back();
    t.inputs.push_back(gain[i] * x + offset[i]);
    t.states.push_back(d.a[i] * x + d.b[i] * t.inputs.back() + d.c[i]);
  }
  return t;
}

SamplePoint sample_admissible_point(const PlantModel& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> power(8000.0, 40000.0);
  std::uniform_real_distribution<double> lambda(1.6, 2.4);
  InitialStatePolicy pol;
  OperatingPoint op;
  for (int attempt = 0;; ++attempt) {
    pol.lambda_target = lambda(rng);
    try {
      op = steady_state(model, power(rng), pol);
      break;
    } catch (const PlantError&) {
      if (attempt == 20) throw;
    }
  }
  SamplePoint s{op.x, op.u};
  for (int i = 0; i < 4; ++i) s.x(i) *= 1.0 + 0.05 * uni(rng);
  s.x(sx::kVsoc) = 0.6 + 0.3 * uni(rng);
  s.x(sx::kVs) = 0.5 * uni(rng);
  s.x(sx::kVf) = 0.5 * uni(rng);
  s.x(sx::kQdis) = 30.0 + 30.0 * uni(rng);
  s.u(su::kVcm) *= 1.0 + 0.05 * uni(rng);
  s.u(su::kIst) *= 1.0 + 0.05 * uni(rng);
  s.u(su::kIbat) = 36.0 * uni(rng);
  return s;
}

CheckResult check_riccati_equivalence(const SelfcheckOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(o.seed);
  SolverOptions so;
  so.tol_cost = 1e-12;
  so.tol_grad = 1e-10;
  const AlIlqrSolver solver(so);
  double worst = 0.0;
  int worst_iters = 0;
  bool all_converged = true;
  for (int inst = 0; inst < o.lq_instances; ++inst) {
    const LqProblem p(random_lq(rng, 8, 3, 10));
    const Trajectory ref = riccati_oracle(p.data());
    Trajectory init;
    init.inputs.assign(10, VectorXd::Zero(3));
    const SolveResult r = solver.solve(p, init);
    all_converged = all_converged && r.status == SolveStatus::Converged;
    worst_iters = std::max(worst_iters, r.inner_iterations);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ref.inputs.size(); ++k) {
      num += (r.trajectory.inputs[k] - ref.inputs[k]).squaredNorm();
      den += ref.inputs[k].squaredNorm();
    }
    for (std::size_t k = 0; k < ref.states.size(); ++k) {
      num += (r.trajectory.states[k] - ref.states[k]).squaredNorm();
      den += ref.states[k].squaredNorm();
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  CheckResult c;
  c.name = "riccati_equivalence";
  c.value = worst;
  c.bound = "rel err <= 1e-8, inner iters <= 2";
  c.pass = all_converged && worst <= 1e-8 && worst_iters <= 2;
  c.detail = std::to_string(o.lq_instances) + " instances, max inner iterations " +
             std::to_string(worst_iters) + (all_converged ? "" : ", some not converged");
  c.seconds = seconds_since(t0);
  return c;
}

CheckResult check_jacobian_fidelity(const SelfcheckOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const PlantModel model(o.plant);
  std::mt19937_64 rng(o.seed + 1);
  const double dt = 0.05;
  // perturbation scales per component
  const State xs = (State() << 1e4, 1e4, 1e3, 1e4, 0.1, 0.1, 0.1, 1.0).finished();
  const Input us(10.0, 10.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < o.jacobian_points; ++n) {
    const SamplePoint s = sample_admissible_point(model, rng);
    DiscreteStep d = step_with_sensitivities(model, s.x, s.u, dt);
    if (o.corrupt_jacobian) d.a(sx::kPO2, sx::kPO2) *= 1.0 + 1e-3;
    // column-wise relative error of central differences
    auto column_error = [&](const State& analytic, const State& fd) {
      return (analytic - fd).norm() / std::max(analytic.norm(), 1e-12);
    };
    for (int j = 0; j < kNumStates; ++j) {
      const double h = 1e-6 * std::max(std::abs(s.x(j)), xs(j));
      State xp = s.x, xm = s.x;
      xp(j) += h;
      xm(j) -= h;
      const State fd = (step(model, xp, s.u, dt) - step(model, xm, s.u, dt)) / (2.0 * h);
      worst = std::max(worst, column_error(d.a.col(j), fd));
    }
    for (int j = 0; j < kNumInputs; ++j) {
      const double h = 1e-6 * std::max(std::abs(s.u(j)), us(j));
      Input up = s.u, um = s.u;
      up(j) += h;
      um(j) -= h;
      const State fd = (step(model, s.x, up, dt) - step(model, s.x, um, dt)) / (2.0 * h);
      worst = std::max(worst, column_error(d.b.col(j), fd));
    }
  }
  CheckResult c;
  c.name = "jacobian_fidelity";
  c.value = worst;
  c.bound = "rel err <= 1e-5";
  c.pass = worst <= 1e-5;
  c.detail = std::to_string(o.jacobian_points) + " points, central differences";
  c.seconds = seconds_since(t0);
  return c;
}

CheckResult check_integrator_order(const SelfcheckOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const PlantModel model(o.plant);
  std::mt19937_64 rng(o.seed + 2);
  const double dt = 0.05;
  const State scale = (State() << 1e4, 1e4, 1e3, 1e4, 0.1, 0.1, 0.1, 1.0).finished();
  // default substeps against half of them; below ~16 the fast cathode mode
  // is still pre-asymptotic
  const int coarse = kDefaultSubsteps;
  const int dense = 4096;
  double worst_lo = 1e300, worst_hi = 0.0;
  const int points = 10;
  for (int n = 0; n < points; ++n) {
    const SamplePoint s = sample_admissible_point(model, rng);
    const State ref = step(model, s.x, s.u, dt, dense);
    const double e1 = ((step(model, s.x, s.u, dt, coarse) - ref).array() / scale.array()).abs().maxCoeff();
    const double e2 = ((step(model, s.x, s.u, dt, 2 * coarse) - ref).array() / scale.array()).abs().maxCoeff();
    const double ratio = e1 / e2;
    worst_lo = std::min(worst_lo, ratio);
    worst_hi = std::max(worst_hi, ratio);
  }
  CheckResult c;
  c.name = "integrator_order";
  c.value = worst_lo;
  c.bound = "error ratio in [12, 20]";
  c.pass = worst_lo >= 12.0 && worst_hi <= 20.0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d points, ratio range [%.2f, %.2f]", points, worst_lo, worst_hi);
  c.detail = buf;
  c.seconds = seconds_since(t0);
  return c;
}

std::vector<CheckResult> run_selfchecks(const SelfcheckOptions& o) {
  return {check_riccati_equivalence(o), check_jacobian_fidelity(o), check_integrator_order(o)};
}

std::string format_checks(const std::vector<CheckResult>& rows) {
  std::string out;
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-4s %-20s value %s  (%s)  %.2f s  %s\n", r.pass ? "PASS" : "FAIL",
                  r.name.c_str(), sci(r.value).c_str(), r.bound.c_str(), r.seconds, r.detail.c_str());
    out += buf;
  }
  return out;
}

}  // namespace fcplan
