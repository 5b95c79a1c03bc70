#pragma once

#include <stdexcept>

#include "fcplan/params.hpp"
#include "fcplan/types.hpp"

namespace fcplan {

class PlantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value and first partial derivatives of a scalar map of two arguments.
struct Scalar2 {
  double value = 0.0;
  double d_first = 0.0;
  double d_second = 0.0;
};

struct PowerGradient {
  double value = 0.0;
  State d_x = State::Zero();
  Input d_u = Input::Zero();
};

// Continuous-time fuel-cell/battery plant. Immutable once constructed.
class PlantModel {
 public:
  static constexpr int nx = kNumStates;
  static constexpr int nu = kNumInputs;

  PlantModel();
  explicit PlantModel(PlantParams params);

  const PlantParams& params() const { return params_; }
  const DerivedCoeffs& coeffs() const { return coeffs_; }

  // Cathode outlet mass flow through the throttle [kg/s]; derivatives are
  // with respect to p_O2 and p_N2 (equal, the flow depends on their sum).
  Scalar2 psi_ca(double p_o2, double p_n2) const;
  // Compressor mass flow [kg/s]; derivatives w.r.t. omega_cp and p_sm.
  Scalar2 psi_cm(double omega_cp, double p_sm) const;

  double cathode_pressure(const State& x) const;

  Eigen::Vector4d fc_dynamics(const State& x, const Input& u) const;
  Eigen::Vector3d battery_dynamics(const State& x, const Input& u) const;
  State dynamics(const State& x, const Input& u) const;
  // Closed-form df/dx and df/du.
  void jacobians(const State& x, const Input& u, StateJacobian& a, InputJacobian& b) const;

  // Stack voltage [V]; throws PlantError on cell-voltage collapse.
  double stack_voltage(double p_o2, double i_st) const;
  // Unchecked voltage with its partials w.r.t. p_O2 and I_st.
  Scalar2 stack_voltage_partials(double p_o2, double i_st) const;
  double battery_terminal_voltage(const State& x, double i_bat) const;
  double compressor_power(const State& x, const Input& u) const;

  double system_power(const State& x, const Input& u) const;
  PowerGradient system_power_gradient(const State& x, const Input& u) const;

  // Oxygen mass flow into the cathode [kg/s] and consumed by the reaction.
  double oxygen_inflow(const State& x) const;
  double oxygen_consumption(double i_st) const;
  // Returns kLambdaSentinel when I_st <= kLambdaCurrentEpsilon.
  double oxygen_excess_ratio(const State& x, const Input& u) const;

  double hydrogen_rate(double i_st) const;

  static constexpr double kLambdaSentinel = 1000.0;
  static constexpr double kLambdaCurrentEpsilon = 1e-3;

  // Alias used by the integrators.
  State derivative(const State& x, const Input& u) const { return dynamics(x, u); }

 private:
  PlantParams params_;
  DerivedCoeffs coeffs_;
};

double hydrogen_rate(double i_st, const FcParams& fc);

}  // namespace fcplan
