#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "fcplan/plant.hpp"

namespace fcplan {

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(int component, const std::string& what)
      : std::runtime_error(what), component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

// A model supplies nx, nu, derivative(x, u) and jacobians(x, u, A, B).
template <class Model>
concept ContinuousModel = requires(const Model& m,
                                   const Eigen::Matrix<double, Model::nx, 1>& x,
                                   const Eigen::Matrix<double, Model::nu, 1>& u,
                                   Eigen::Matrix<double, Model::nx, Model::nx>& a,
                                   Eigen::Matrix<double, Model::nx, Model::nu>& b) {
  { m.derivative(x, u) } -> std::convertible_to<Eigen::Matrix<double, Model::nx, 1>>;
  m.jacobians(x, u, a, b);
};

template <int Nx, int Nu>
struct DiscreteStepT {
  Eigen::Matrix<double, Nx, 1> x_next;
  Eigen::Matrix<double, Nx, Nx> a;
  Eigen::Matrix<double, Nx, Nu> b;
};

using DiscreteStep = DiscreteStepT<kNumStates, kNumInputs>;

// h = 3.125 ms; the fastest cathode mode has a ~15 ms time constant.
inline constexpr int kDefaultSubsteps = 16;

namespace detail {

template <int Nx>
void check_finite(const Eigen::Matrix<double, Nx, 1>& x) {
  for (int i = 0; i < Nx; ++i) {
    if (!std::isfinite(x(i))) {
      throw IntegrationError(i, "integration produced a non-finite state component " +
                                    std::to_string(i));
    }
  }
}

}  // namespace detail

// Fixed-step RK4 over dt with zero-order-hold input.
template <ContinuousModel Model>
Eigen::Matrix<double, Model::nx, 1> rk4_step(const Model& model,
                                             const Eigen::Matrix<double, Model::nx, 1>& x0,
                                             const Eigen::Matrix<double, Model::nu, 1>& u,
                                             double dt, int substeps = kDefaultSubsteps) {
  if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("rk4_step: dt and substeps must be positive");
  using Vec = Eigen::Matrix<double, Model::nx, 1>;
  const double h = dt / substeps;
  Vec x = x0;
  for (int s = 0; s < substeps; ++s) {
    const Vec k1 = model.derivative(x, u);
    const Vec k2 = model.derivative(Vec(x + 0.5 * h * k1), u);
    const Vec k3 = model.derivative(Vec(x + 0.5 * h * k2), u);
    const Vec k4 = model.derivative(Vec(x + h * k3), u);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::check_finite<Model::nx>(x);
  }
  return x;
}

// RK4 with the sensitivities carried through the same stages, so (A, B) are
// the exact Jacobians of rk4_step with respect to (x0, u).
template <ContinuousModel Model>
DiscreteStepT<Model::nx, Model::nu> rk4_step_with_sensitivities(
    const Model& model, const Eigen::Matrix<double, Model::nx, 1>& x0,
    const Eigen::Matrix<double, Model::nu, 1>& u, double dt, int substeps = kDefaultSubsteps) {
  if (!(dt > 0.0) || substeps < 1) throw std::invalid_argument("rk4_step: dt and substeps must be positive");
  constexpr int nx = Model::nx;
  constexpr int nu = Model::nu;
  using Vec = Eigen::Matrix<double, nx, 1>;
  using Sens = Eigen::Matrix<double, nx, nx + nu>;
  using Jx = Eigen::Matrix<double, nx, nx>;
  using Ju = Eigen::Matrix<double, nx, nu>;

  const double h = dt / substeps;
  Vec x = x0;
  Sens s = Sens::Zero();
  s.template leftCols<nx>().setIdentity();

  Jx jx;
  Ju ju;
  auto stage = [&](const Vec& xs, const Sens& ss, Vec& k, Sens& dk) {
    k = model.derivative(xs, u);
    model.jacobians(xs, u, jx, ju);
    dk.noalias() = jx * ss;
    dk.template rightCols<nu>() += ju;
  };

  Vec k1, k2, k3, k4;
  Sens d1, d2, d3, d4;
  for (int step = 0; step < substeps; ++step) {
    stage(x, s, k1, d1);
    stage(Vec(x + 0.5 * h * k1), Sens(s + 0.5 * h * d1), k2, d2);
    stage(Vec(x + 0.5 * h * k2), Sens(s + 0.5 * h * d2), k3, d3);
    stage(Vec(x + h * k3), Sens(s + h * d3), k4, d4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    detail::check_finite<nx>(x);
  }
  DiscreteStepT<nx, nu> out;
  out.x_next = x;
  out.a = s.template leftCols<nx>();
  out.b = s.template rightCols<nu>();
  if (!out.a.allFinite() || !out.b.allFinite()) {
    throw IntegrationError(-1, "non-finite sensitivity matrix");
  }
  return out;
}

// Plant-specific entry points.
State step(const PlantModel& model, const State& x, const Input& u, double dt,
           int substeps = kDefaultSubsteps);
DiscreteStep step_with_sensitivities(const PlantModel& model, const State& x, const Input& u,
                                     double dt, int substeps = kDefaultSubsteps);

struct ContinuousJacobian {
  StateJacobian a;
  InputJacobian b;
};
ContinuousJacobian jacobian_continuous(const PlantModel& model, const State& x, const Input& u);

}  // namespace fcplan
