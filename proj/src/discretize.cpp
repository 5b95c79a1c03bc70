#include "fcplan/discretize.hpp"

namespace fcplan {

State step(const PlantModel& model, const State& x, const Input& u, double dt, int substeps) {
  return rk4_step(model, x, u, dt, substeps);
}

DiscreteStep step_with_sensitivities(const PlantModel& model, const State& x, const Input& u,
                                     double dt, int substeps) {
  return rk4_step_with_sensitivities(model, x, u, dt, substeps);
}

ContinuousJacobian jacobian_continuous(const PlantModel& model, const State& x, const Input& u) {
  ContinuousJacobian j;
  model.jacobians(x, u, j.a, j.b);
  return j;
}

}  // namespace fcplan
