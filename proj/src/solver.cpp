#include "fcplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>

namespace fcplan {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::LineSearchFailed: return "LineSearchFailed";
    case SolveStatus::NumericalError: return "NumericalError";
  }
  return "Unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Powell-Hestenes-Rockafellar term for g <= 0:
// (max(0, lambda + mu g)^2 - lambda^2) / (2 mu)
double phr_value(const VectorXd& g, const VectorXd& lambda, const VectorXd& mu) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double t = std::max(0.0, lambda(i) + mu(i) * g(i));
    s += (t * t - lambda(i) * lambda(i)) / (2.0 * mu(i));
  }
  return s;
}

// Adds the PHR gradient and Gauss-Newton Hessian to an expansion.
void add_phr(const ConstraintBlock& c, const VectorXd& lambda, const VectorXd& mu, VectorXd& lx,
             MatrixXd& lxx, VectorXd* lu, MatrixXd* luu, MatrixXd* lux) {
  for (Eigen::Index i = 0; i < c.values.size(); ++i) {
    const double t = lambda(i) + mu(i) * c.values(i);
    if (t <= 0.0) continue;
    const auto gx = c.jx.row(i).transpose();
    lx.noalias() += t * gx;
    lxx.noalias() += mu(i) * gx * gx.transpose();
    if (lu != nullptr) {
      const auto gu = c.ju.row(i).transpose();
      lu->noalias() += t * gu;
      luu->noalias() += mu(i) * gu * gu.transpose();
      lux->noalias() += mu(i) * gu * gx.transpose();
    }
  }
}

double positive_part_max(const VectorXd& g) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) v = std::max(v, g(i));
  return v;
}

struct Expansion {
  std::vector<MatrixXd> a, b;
  std::vector<StageExpansion> stage;
  VectorXd vx;
  MatrixXd vxx;
};

Expansion expand(const ShootingProblem& p, const Trajectory& t, const Multipliers& m) {
  const int n = p.horizon();
  const int nx = p.state_dim();
  const int nu = p.input_dim();
  Expansion e;
  e.a.resize(static_cast<std::size_t>(n));
  e.b.resize(static_cast<std::size_t>(n));
  e.stage.resize(static_cast<std::size_t>(n));
  ConstraintBlock c;
  for (int k = 0; k < n; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    p.linearize(k, t.states[ks], t.inputs[ks], e.a[ks], e.b[ks]);
    StageExpansion& s = e.stage[ks];
    s.resize(nx, nu);
    p.stage_expansion(k, t.states[ks], t.inputs[ks], s);
    if (p.num_stage_constraints(k) > 0) {
      p.stage_constraints(k, t.states[ks], t.inputs[ks], c);
      add_phr(c, m.lambda[ks], m.penalty[ks], s.lx, s.lxx, &s.lu, &s.luu, &s.lux);
    }
  }
  p.terminal_expansion(t.states.back(), e.vx, e.vxx);
  if (p.num_terminal_constraints() > 0) {
    p.terminal_constraints(t.states.back(), c);
    add_phr(c, m.lambda.back(), m.penalty.back(), e.vx, e.vxx, nullptr, nullptr, nullptr);
  }
  return e;
}

Gains riccati(const Expansion& e, double reg) {
  const auto n = e.stage.size();
  Gains g;
  g.feedforward.resize(n);
  g.feedback.resize(n);
  VectorXd vx = e.vx;
  MatrixXd vxx = e.vxx;
  for (std::size_t j = n; j-- > 0;) {
    const MatrixXd& a = e.a[j];
    const MatrixXd& b = e.b[j];
    const StageExpansion& s = e.stage[j];
    const VectorXd qx = s.lx + a.transpose() * vx;
    const VectorXd qu = s.lu + b.transpose() * vx;
    const MatrixXd vxx_a = vxx * a;
    const MatrixXd qxx = s.lxx + a.transpose() * vxx_a;
    const MatrixXd quu = s.luu + b.transpose() * vxx * b;
    const MatrixXd qux = s.lux + b.transpose() * vxx_a;
    MatrixXd quu_reg = quu;
    quu_reg.diagonal().array() += reg;
    Eigen::LLT<MatrixXd> llt(quu_reg);
    if (llt.info() != Eigen::Success) return g;
    VectorXd kff = -llt.solve(qu);
    MatrixXd kfb = -llt.solve(qux);
    if (!kff.allFinite() || !kfb.allFinite()) return g;
    vx = qx + kfb.transpose() * (quu * kff) + kfb.transpose() * qu + qux.transpose() * kff;
    vxx = qxx + kfb.transpose() * quu * kfb + kfb.transpose() * qux + qux.transpose() * kfb;
    vxx = 0.5 * (vxx + vxx.transpose()).eval();
    g.feedforward[j] = std::move(kff);
    g.feedback[j] = std::move(kfb);
  }
  // Quadratic model along the closed-loop path u = u_bar + alpha k + K dx on
  // the linearized dynamics: dx and du are both linear in alpha, so the model
  // is exactly alpha dv1 + alpha^2 dv2. The usual sum of k'Qu is only right
  // at alpha = 1 once reg > 0.
  VectorXd xi = VectorXd::Zero(e.vx.size());
  for (std::size_t j = 0; j < n; ++j) {
    const StageExpansion& s = e.stage[j];
    const VectorXd nu = g.feedforward[j] + g.feedback[j] * xi;
    g.dv1 += s.lx.dot(xi) + s.lu.dot(nu);
    g.dv2 += 0.5 * (xi.dot(s.lxx * xi) + nu.dot(s.luu * nu)) + nu.dot(s.lux * xi);
    xi = (e.a[j] * xi + e.b[j] * nu).eval();
  }
  g.dv1 += e.vx.dot(xi);
  g.dv2 += 0.5 * xi.dot(e.vxx * xi);
  g.ok = true;
  return g;
}

}  // namespace

Trajectory AlIlqrSolver::rollout(const ShootingProblem& p,
                                 const std::vector<VectorXd>& inputs) const {
  const int n = p.horizon();
  Trajectory t;
  t.states.reserve(static_cast<std::size_t>(n) + 1);
  t.inputs.reserve(static_cast<std::size_t>(n));
  t.states.push_back(p.initial_state());
  for (int k = 0; k < n; ++k) {
    VectorXd u = inputs[static_cast<std::size_t>(k)];
    p.clamp_input(k, u);
    t.states.push_back(p.step(k, t.states.back(), u));
    t.inputs.push_back(std::move(u));
  }
  return t;
}

Multipliers AlIlqrSolver::initial_multipliers(const ShootingProblem& p) const {
  Multipliers m;
  const int n = p.horizon();
  for (int k = 0; k < n; ++k) {
    const int rows = p.num_stage_constraints(k);
    m.lambda.push_back(VectorXd::Zero(rows));
    m.penalty.push_back(VectorXd::Constant(rows, opts_.penalty_initial));
  }
  const int rows = p.num_terminal_constraints();
  m.lambda.push_back(VectorXd::Zero(rows));
  m.penalty.push_back(VectorXd::Constant(rows, opts_.penalty_initial));
  return m;
}

double AlIlqrSolver::objective(const ShootingProblem& p, const Trajectory& t) const {
  double j = 0.0;
  for (int k = 0; k < p.horizon(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    j += p.stage_cost(k, t.states[ks], t.inputs[ks]);
  }
  return j + p.terminal_cost(t.states.back());
}

double AlIlqrSolver::al_objective(const ShootingProblem& p, const Trajectory& t,
                                  const Multipliers& m) const {
  double j = objective(p, t);
  ConstraintBlock c;
  for (int k = 0; k < p.horizon(); ++k) {
    if (p.num_stage_constraints(k) == 0) continue;
    const auto ks = static_cast<std::size_t>(k);
    p.stage_constraints(k, t.states[ks], t.inputs[ks], c);
    j += phr_value(c.values, m.lambda[ks], m.penalty[ks]);
  }
  if (p.num_terminal_constraints() > 0) {
    p.terminal_constraints(t.states.back(), c);
    j += phr_value(c.values, m.lambda.back(), m.penalty.back());
  }
  return j;
}

double AlIlqrSolver::max_violation(const ShootingProblem& p, const Trajectory& t) const {
  double v = 0.0;
  ConstraintBlock c;
  for (int k = 0; k < p.horizon(); ++k) {
    if (p.num_stage_constraints(k) == 0) continue;
    const auto ks = static_cast<std::size_t>(k);
    p.stage_constraints(k, t.states[ks], t.inputs[ks], c);
    v = std::max(v, positive_part_max(c.values));
  }
  if (p.num_terminal_constraints() > 0) {
    p.terminal_constraints(t.states.back(), c);
    v = std::max(v, positive_part_max(c.values));
  }
  return v;
}

double AlIlqrSolver::complementarity(const ShootingProblem& p, const Trajectory& t,
                                     const Multipliers& m) const {
  double v = 0.0;
  auto rows = [&](const VectorXd& g, const VectorXd& lam) {
    for (Eigen::Index i = 0; i < g.size(); ++i) v = std::max(v, std::min(lam(i), std::max(0.0, -g(i))));
  };
  ConstraintBlock c;
  for (int k = 0; k < p.horizon(); ++k) {
    if (p.num_stage_constraints(k) == 0) continue;
    const auto ks = static_cast<std::size_t>(k);
    p.stage_constraints(k, t.states[ks], t.inputs[ks], c);
    rows(c.values, m.lambda[ks]);
  }
  if (p.num_terminal_constraints() > 0) {
    p.terminal_constraints(t.states.back(), c);
    rows(c.values, m.lambda.back());
  }
  return v;
}

Gains AlIlqrSolver::backward_pass(const ShootingProblem& p, const Trajectory& nominal,
                                  const Multipliers& m, double reg) const {
  return riccati(expand(p, nominal, m), reg);
}

std::vector<double> AlIlqrSolver::step_sizes() const {
  std::vector<double> a;
  double alpha = 1.0;
  for (int i = 0; i < opts_.line_search_steps; ++i, alpha *= 0.5) a.push_back(alpha);
  return a;
}

Trajectory AlIlqrSolver::apply_gains(const ShootingProblem& p, const Trajectory& nominal,
                                     const Gains& gains, double alpha, int* clamps) const {
  const int n = p.horizon();
  Trajectory t;
  t.states.reserve(nominal.states.size());
  t.inputs.reserve(nominal.inputs.size());
  t.states.push_back(nominal.states.front());
  int moved = 0;
  for (int k = 0; k < n; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    VectorXd u = nominal.inputs[ks] + alpha * gains.feedforward[ks] +
                 gains.feedback[ks] * (t.states[ks] - nominal.states[ks]);
    if (p.clamp_input(k, u)) ++moved;
    t.states.push_back(p.step(k, t.states[ks], u));
    t.inputs.push_back(std::move(u));
  }
  if (clamps != nullptr) *clamps = moved;
  return t;
}

ForwardResult AlIlqrSolver::forward_pass(const ShootingProblem& p, const Trajectory& nominal,
                                         const Gains& gains, const Multipliers& m,
                                         double nominal_objective,
                                         const std::vector<double>& step_sizes) const {
  ForwardResult best;
  best.al_objective = nominal_objective;
  for (double alpha : step_sizes) {
    Trajectory t;
    int clamps = 0;
    try {
      t = apply_gains(p, nominal, gains, alpha, &clamps);
    } catch (const std::exception&) {
      continue;
    }
    const double j = al_objective(p, t, m);
    if (!std::isfinite(j)) continue;
    const double expected = -(alpha * gains.dv1 + alpha * alpha * gains.dv2);
    const double actual = nominal_objective - j;
    if (expected > 0.0 && actual >= opts_.armijo * expected) {
      best.trajectory = std::move(t);
      best.al_objective = j;
      best.alpha = alpha;
      best.accepted = true;
      best.clamp_events = clamps;
      return best;
    }
  }
  return best;
}

SolveResult AlIlqrSolver::solve(const ShootingProblem& p, const Trajectory& init,
                                const Multipliers* warm_multipliers) const {
  SolveResult r;
  Multipliers m = warm_multipliers != nullptr ? *warm_multipliers : initial_multipliers(p);
  Trajectory traj;
  try {
    traj = rollout(p, init.inputs);
  } catch (const std::exception&) {
    r.status = SolveStatus::NumericalError;
    r.trajectory = init;
    return r;
  }
  const auto alphas = step_sizes();
  const int n = p.horizon();
  double reg = opts_.reg_initial;

  auto finish = [&](SolveStatus status) {
    r.status = status;
    r.trajectory = traj;
    r.cost = objective(p, traj);
    r.al_objective = al_objective(p, traj, m);
    r.max_violation = max_violation(p, traj);
    r.multipliers = m;
    return r;
  };

  std::vector<VectorXd> last_violation;
  for (const auto& l : m.lambda) {
    last_violation.push_back(VectorXd::Constant(l.size(), std::numeric_limits<double>::infinity()));
  }

  for (int outer = 0; outer < opts_.max_outer_iterations; ++outer) {
    r.outer_iterations = outer + 1;
    double j = al_objective(p, traj, m);
    bool inner_converged = false;

    for (int inner = 0; inner < opts_.max_inner_iterations && !inner_converged; ++inner) {
      const Expansion e = expand(p, traj, m);
      ++r.inner_iterations;
      ForwardResult fwd;
      bool progressed = false;
      while (true) {
        const Gains g = riccati(e, reg);
        if (!g.ok) {
          reg = std::max(opts_.reg_min, reg * opts_.reg_increase);
          if (reg > opts_.reg_max) return finish(SolveStatus::NumericalError);
          continue;
        }
        const double scale = 1.0 + std::abs(j);
        const double predicted = -(g.dv1 + g.dv2);
        double step_norm = 0.0;
        for (int k = 0; k < n; ++k) {
          const auto ks = static_cast<std::size_t>(k);
          const VectorXd rel = g.feedforward[ks].array() /
                               (traj.inputs[ks].array().abs() + 1.0);
          step_norm = std::max(step_norm, rel.lpNorm<Eigen::Infinity>());
        }
        if (predicted <= opts_.tol_cost * scale || step_norm < opts_.tol_grad) {
          inner_converged = true;
          break;
        }
        fwd = forward_pass(p, traj, g, m, j, alphas);
        if (fwd.accepted) {
          reg *= opts_.reg_decrease;
          if (reg < opts_.reg_min) reg = 0.0;
          progressed = true;
          break;
        }
        // Rejected: a tiny predicted decrease means we are at numerical
        // stationarity of the AL objective.
        if (predicted <= 1e2 * opts_.tol_cost * scale) {
          inner_converged = true;
          break;
        }
        reg = std::max(opts_.reg_min, reg * opts_.reg_increase);
        if (reg > opts_.reg_max) return finish(SolveStatus::LineSearchFailed);
      }
      if (!progressed) break;
      const double change = j - fwd.al_objective;
      traj = std::move(fwd.trajectory);
      j = fwd.al_objective;
      r.clamp_events = fwd.clamp_events;
      if (opts_.record_trace) {
        TraceEntry te;
        te.outer = outer;
        te.inner = inner;
        te.cost = objective(p, traj);
        te.al_objective = j;
        te.violation = max_violation(p, traj);
        te.regularization = reg;
        te.alpha = fwd.alpha;
        te.accepted = true;
        r.trace.push_back(te);
      }
      if (change <= opts_.tol_cost * (1.0 + std::abs(j))) inner_converged = true;
    }

    const double viol = max_violation(p, traj);
    if (inner_converged && viol <= opts_.tol_viol &&
        complementarity(p, traj, m) <= opts_.tol_viol) {
      return finish(SolveStatus::Converged);
    }

    // Outer update of multipliers and penalties.
    ConstraintBlock c;
    auto update = [&](std::size_t idx, const VectorXd& g) {
      VectorXd& lam = m.lambda[idx];
      VectorXd& mu = m.penalty[idx];
      VectorXd& last = last_violation[idx];
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        lam(i) = std::clamp(lam(i) + mu(i) * g(i), 0.0, opts_.multiplier_max);
        // Grow the penalty where the violation did not shrink enough since
        // the last outer step, and where a multiplier survives on a slack
        // row (a stale warm start then drains in a few outer steps).
        // Elsewhere growth only stiffens the inner problem.
        const bool slow = g(i) > opts_.tol_viol && g(i) > opts_.violation_decrease * last(i);
        const bool stale = lam(i) > opts_.tol_viol && g(i) < -opts_.tol_viol;
        if (slow || stale) mu(i) = std::min(mu(i) * opts_.penalty_growth, opts_.penalty_max);
        last(i) = std::max(g(i), 0.0);
      }
    };
    for (int k = 0; k < n; ++k) {
      if (p.num_stage_constraints(k) == 0) continue;
      const auto ks = static_cast<std::size_t>(k);
      p.stage_constraints(k, traj.states[ks], traj.inputs[ks], c);
      update(ks, c.values);
    }
    if (p.num_terminal_constraints() > 0) {
      p.terminal_constraints(traj.states.back(), c);
      update(static_cast<std::size_t>(n), c.values);
    }
  }
  return finish(SolveStatus::MaxIter);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace) {
  os << "outer,inner,cost,al_objective,violation,regularization,alpha\n";
  for (const auto& t : trace) {
    os << t.outer << ',' << t.inner << ',' << t.cost << ',' << t.al_objective << ','
       << t.violation << ',' << t.regularization << ',' << t.alpha << '\n';
  }
}

}  // namespace fcplan
