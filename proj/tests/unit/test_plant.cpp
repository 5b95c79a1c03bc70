#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fcplan/discretize.hpp"
#include "fcplan/plant.hpp"
#include "support.hpp"

using namespace fcplan;
using fcplan::test::rel_err;

namespace {

constexpr double kR = 8.314462618;
constexpr double kF = 96485.33212;

// Textbook isentropic nozzle flow, both branches.
double nozzle_flow(const FcParams& fc, double p_up) {
  const double g = fc.gamma;
  const double k = fc.c_d * fc.a_t * p_up / std::sqrt(fc.nozzle_gas_constant * fc.t_st);
  const double r = fc.p_atm / p_up;
  const double r_crit = std::pow(2.0 / (g + 1.0), g / (g - 1.0));
  if (r <= r_crit) return k * std::sqrt(g) * std::pow(2.0 / (g + 1.0), (g + 1.0) / (2.0 * (g - 1.0)));
  return k * std::pow(r, 1.0 / g) * std::sqrt(2.0 * g / (g - 1.0) * (1.0 - std::pow(r, (g - 1.0) / g)));
}

State zero_state() { return State::Zero(); }

}  // namespace

TEST(Coefficients, OxygenCurrentGainFromUnits) {
  const PlantModel m;
  const double expect = kR * 353.15 * 381.0 / (4.0 * kF * 0.01);
  EXPECT_LT(rel_err(m.coeffs()(7), expect), 1e-12);
}

TEST(Coefficients, PressureReferenceAndExponent) {
  const PlantModel m;
  EXPECT_DOUBLE_EQ(m.coeffs()(11), 101325.0);
  EXPECT_NEAR(m.coeffs()(12), 2.0 / 7.0, 1e-15);
}

TEST(Coefficients, OverrideReplacesReconstructedValue) {
  PlantParams p;
  p.coeff_overrides[6] = 5.0;
  EXPECT_DOUBLE_EQ(derive_coefficients(p)(7), 5.0);
  EXPECT_NE(derive_coefficients(PlantParams{})(7), 5.0);
}

TEST(Coefficients, RejectNonPhysicalParameters) {
  PlantParams p;
  p.fc.v_ca = -1.0;
  EXPECT_THROW(derive_coefficients(p), std::invalid_argument);
  p = PlantParams{};
  p.fc.gamma = 1.0;
  EXPECT_THROW(derive_coefficients(p), std::invalid_argument);
}

TEST(CathodeOutflow, ZeroAtAtmosphericPressure) {
  const PlantModel m;
  const double dry = m.params().fc.p_atm - m.coeffs()(2);
  EXPECT_NEAR(m.psi_ca(0.21 * dry, 0.79 * dry).value, 0.0, 1e-15);
}

TEST(CathodeOutflow, DoublingPartialPressuresIncreasesFlow) {
  const PlantModel m;
  for (double po2 : {1.0e4, 2.0e4, 4.0e4}) {
    const double pn2 = 4.0 * po2;
    EXPECT_GT(m.psi_ca(2.0 * po2, 2.0 * pn2).value, m.psi_ca(po2, pn2).value);
  }
}

TEST(CathodeOutflow, MatchesNozzleLawAwayFromZeroDifferential) {
  const PlantModel m;
  const FcParams& fc = m.params().fc;
  for (double ratio : {1.3, 1.7, 1.95, 2.5, 3.5}) {
    const double p = ratio * fc.p_atm;
    const double dry = p - m.coeffs()(2);
    EXPECT_LT(rel_err(m.psi_ca(0.2 * dry, 0.8 * dry).value, nozzle_flow(fc, p)), 1e-12) << ratio;
  }
}

TEST(CathodeOutflow, ChokesBelowCriticalRatio) {
  const PlantModel m;
  const FcParams& fc = m.params().fc;
  const double r_crit = std::pow(2.0 / 2.4, 1.4 / 0.4);
  EXPECT_NEAR(r_crit, 0.528, 5e-4);
  auto flow = [&](double p) { return m.psi_ca(p - m.coeffs()(2), 0.0).value; };
  const double p_crit = fc.p_atm / r_crit;
  // continuous across the switch
  EXPECT_LT(rel_err(flow(p_crit * (1.0 - 1e-9)), flow(p_crit * (1.0 + 1e-9))), 1e-6);
  // proportional to upstream pressure once choked, not before
  EXPECT_LT(rel_err(flow(1.1 * p_crit) / (1.1 * p_crit), flow(1.5 * p_crit) / (1.5 * p_crit)), 1e-12);
  EXPECT_GT(rel_err(flow(0.7 * p_crit) / (0.7 * p_crit), flow(0.9 * p_crit) / (0.9 * p_crit)), 1e-3);
}

// Below atmospheric manifold pressure the fitted map would suck air in at
// standstill; that region is excluded by a constraint row.
TEST(CompressorFlow, StationaryCompressorDeliversNothing) {
  const PlantModel m;
  for (double p : {101325.0, 1.5e5, 2.5e5}) EXPECT_EQ(m.psi_cm(0.0, p).value, 0.0);
}

TEST(CompressorFlow, ForwardFlowAtAtmosphere) {
  const PlantModel m;
  EXPECT_GT(m.psi_cm(5000.0, m.params().fc.p_atm).value, 0.0);
}

TEST(CompressorFlow, NonIncreasingInManifoldPressure) {
  const PlantModel m;
  for (double w : {2000.0, 5000.0, 8000.0, 11000.0}) {
    for (double p = 1.0e5; p < 3.0e5; p += 5000.0) {
      const double h = 1.0;
      const double slope = (m.psi_cm(w, p + h).value - m.psi_cm(w, p - h).value) / (2.0 * h);
      EXPECT_LE(slope, 1e-15) << w << " " << p;
      EXPECT_LE(m.psi_cm(w, p).d_second, 0.0);
    }
  }
}

TEST(FcDynamics, StackCurrentEntersOnlyOxygenRow) {
  const PlantModel m;
  const auto op = test::loaded_point(m);
  Input u0 = op.u, u1 = op.u;
  u0(su::kIst) = 0.0;
  u1(su::kIst) = 100.0;
  const Eigen::Vector4d f0 = m.fc_dynamics(op.x, u0), f1 = m.fc_dynamics(op.x, u1);
  EXPECT_NEAR(f1(0) - f0(0), -m.coeffs()(7) * 100.0, 1e-9 * std::abs(m.coeffs()(7) * 100.0));
  for (int i = 1; i < 4; ++i) EXPECT_EQ(f1(i), f0(i));
}

TEST(FcDynamics, AtmosphericManifoldRemovesHeadTerm) {
  const PlantModel m;
  State x = test::loaded_point(m).x;
  x(sx::kPsm) = m.coeffs()(11);
  const Input u(120.0, 200.0, 0.0);
  const double expect = -m.coeffs()(9) * x(sx::kOmegaCp) + m.coeffs()(13) * u(su::kVcm);
  EXPECT_NEAR(m.fc_dynamics(x, u)(2), expect, 1e-12 * std::abs(expect));
}

TEST(FcDynamics, LongIntegrationSettlesToEquilibrium) {
  const PlantModel m;
  const auto op = test::loaded_point(m);
  State x = op.x;
  x.head<4>() *= 1.05;
  for (int i = 0; i < 200; ++i) x = rk4_step(m, x, op.u, 0.1, 100);
  const Eigen::Vector4d f = m.fc_dynamics(x, op.u);
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(f(i)), 1e-8 * std::abs(x(i))) << i;
  // and it is the equilibrium the steady-state search found
  for (int i = 0; i < 4; ++i) EXPECT_LT(rel_err(x(i), op.x(i)), 1e-6) << i;
}

TEST(BatteryDynamics, PureSelfDischargeAtRest) {
  const PlantModel m;
  State x = zero_state();
  x(sx::kVsoc) = 0.7;
  const Eigen::Vector3d f = m.battery_dynamics(x, Input::Zero());
  EXPECT_EQ(f(1), 0.0);
  EXPECT_EQ(f(2), 0.0);
  EXPECT_DOUBLE_EQ(f(0), -0.7 / (3000.0 * 3600.0 * 12.0));
}

TEST(BatteryDynamics, DischargeLowersSocRate) {
  const PlantModel m;
  State x = zero_state();
  x(sx::kVsoc) = 0.7;
  EXPECT_LT(m.battery_dynamics(x, Input(0, 0, 10.0))(0), m.battery_dynamics(x, Input::Zero())(0));
}

TEST(BatteryDynamics, RcBranchRelaxesExponentially) {
  const PlantModel m;
  const BatteryParams& bp = m.params().battery;
  State x = zero_state();
  const double soc = 0.6;
  x(sx::kVsoc) = soc;
  x(sx::kVs) = 1.0;
  const double tau = bp.r_s.value(soc) * (15.0 / 12.0) * bp.c_s.value(soc) * (12.0 / 15.0);
  double t = 0.0;
  for (int i = 0; i < 20; ++i) {
    x = rk4_step(m, x, Input::Zero(), 0.5, 200);
    t += 0.5;
    EXPECT_NEAR(x(sx::kVs), std::exp(-t / tau), 1e-6) << t;
  }
}

TEST(DischargeIntegrator, EqualsBatteryCurrent) {
  const PlantModel m;
  const auto op = test::loaded_point(m);
  EXPECT_EQ(m.dynamics(op.x, Input(op.u(0), op.u(1), 36.0))(sx::kQdis), 36.0);
  EXPECT_EQ(m.dynamics(op.x, Input(op.u(0), op.u(1), 0.0))(sx::kQdis), 0.0);
}

TEST(Dynamics, FiniteAtRandomAdmissiblePoints) {
  const PlantModel m;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto s = sample_admissible_point(m, rng);
    EXPECT_TRUE(m.dynamics(s.x, s.u).allFinite());
  }
}

TEST(Dynamics, ClosedFormJacobiansMatchFiniteDifferences) {
  const PlantModel m;
  std::mt19937_64 rng(11);
  double worst_a = 0.0, worst_b = 0.0;
  for (int n = 0; n < 100; ++n) {
    const auto s = sample_admissible_point(m, rng);
    StateJacobian a;
    InputJacobian b;
    m.jacobians(s.x, s.u, a, b);
    StateJacobian fa;
    InputJacobian fb;
    for (int j = 0; j < kNumStates; ++j) {
      const double h = 1e-5 * std::max(std::abs(s.x(j)), 1.0);
      State xp = s.x, xm = s.x;
      xp(j) += h;
      xm(j) -= h;
      fa.col(j) = (m.dynamics(xp, s.u) - m.dynamics(xm, s.u)) / (2.0 * h);
    }
    for (int j = 0; j < kNumInputs; ++j) {
      const double h = 1e-5 * std::max(std::abs(s.u(j)), 1.0);
      Input up = s.u, um = s.u;
      up(j) += h;
      um(j) -= h;
      fb.col(j) = (m.dynamics(s.x, up) - m.dynamics(s.x, um)) / (2.0 * h);
    }
    // column-wise, since the self-discharge entry is ~1e-8; the v_soc column can
    // nearly cancel, hence the larger step
    worst_a = std::max(worst_a, test::matrix_rel_err(a, fa, 1e-12));
    worst_b = std::max(worst_b, test::matrix_rel_err(b, fb, 1e-12));
    EXPECT_EQ(b(0, su::kIst), -m.coeffs()(7));
    EXPECT_EQ(b(sx::kQdis, su::kVcm), 0.0);
    EXPECT_EQ(b(sx::kQdis, su::kIst), 0.0);
    EXPECT_EQ(b(sx::kQdis, su::kIbat), 1.0);
  }
  EXPECT_LT(worst_a, 1e-6);
  EXPECT_LT(worst_b, 1e-6);
}

TEST(StackVoltage, NoLoadVoltageIsCellCountTimesOpenCircuit) {
  const PlantModel m;
  const auto& pol = m.params().polarization;
  const double p = 2.0e4;
  const double e_oc = pol.e0 + kR * 353.15 / (4.0 * kF) * std::log((p + pol.p_floor) / pol.p_ref);
  EXPECT_GT(m.stack_voltage(p, 0.0), 0.0);
  EXPECT_LT(rel_err(m.stack_voltage(p, 0.0), 381.0 * e_oc), 1e-12);
}

TEST(StackVoltage, FallsWithCurrentRisesWithOxygen) {
  const PlantModel m;
  for (double p : {1.5e4, 2.5e4, 4.0e4}) {
    for (double i = 0.0; i <= 616.0; i += 8.0) {
      const double h = 1e-3;
      const double slope = (m.stack_voltage_partials(p, i + h).value - m.stack_voltage_partials(p, i - h).value) / (2 * h);
      EXPECT_LT(slope, 0.0) << p << " " << i;
      EXPECT_GT(m.stack_voltage_partials(1.1 * p, i).value, m.stack_voltage_partials(p, i).value);
    }
  }
}

TEST(SystemPower, AllPowerPathsIdle) {
  const PlantModel m;
  EXPECT_EQ(m.system_power(test::loaded_point(m).x, Input::Zero()), 0.0);
}

TEST(SystemPower, BatteryCurrentSignConvention) {
  const PlantModel m;
  const auto op = test::loaded_point(m);
  const BatteryParams& bp = m.params().battery;
  State x = op.x;
  x(sx::kVs) = 0.2;
  x(sx::kVf) = 0.1;
  const double soc = x(sx::kVsoc);
  const double v_term = bp.ocv(soc) - 0.3 - bp.r_series.value(soc) * 15.0 / 12.0 * 36.0;
  const double base = m.system_power(x, op.u);
  const double added = m.system_power(x, Input(op.u(0), op.u(1), 36.0)) - base;
  EXPECT_LT(rel_err(added, v_term * 36.0), 1e-9);
  EXPECT_LT(m.system_power(x, Input(op.u(0), op.u(1), -20.0)), base);
}

TEST(SystemPower, BackEmfBalanceDrawsNoCompressorPower) {
  const PlantModel m;
  State x = test::loaded_point(m).x;
  const Input u(m.params().fc.k_v * x(sx::kOmegaCp), 0.0, 0.0);
  EXPECT_NEAR(m.compressor_power(x, u), 0.0, 1e-9);
}

TEST(SystemPower, GradientMatchesFiniteDifferences) {
  const PlantModel m;
  std::mt19937_64 rng(3);
  for (int n = 0; n < 20; ++n) {
    const auto s = sample_admissible_point(m, rng);
    const PowerGradient g = m.system_power_gradient(s.x, s.u);
    EXPECT_LT(rel_err(g.value, m.system_power(s.x, s.u)), 1e-12);
    for (int j = 0; j < kNumInputs; ++j) {
      const double h = 1e-5 * std::max(std::abs(s.u(j)), 1.0);
      Input up = s.u, um = s.u;
      up(j) += h;
      um(j) -= h;
      const double fd = (m.system_power(s.x, up) - m.system_power(s.x, um)) / (2 * h);
      EXPECT_LT(rel_err(g.d_u(j), fd, 1e-3), 1e-6) << j;
    }
  }
}

TEST(OxygenExcess, SentinelAtVanishingCurrent) {
  const PlantModel m;
  const State x = test::loaded_point(m).x;
  EXPECT_GE(m.oxygen_excess_ratio(x, Input(100.0, 1e-4, 0.0)), 100.0);
}

TEST(OxygenExcess, NoInflowWithoutPressureDifference) {
  const PlantModel m;
  State x = test::loaded_point(m).x;
  x(sx::kPsm) = m.cathode_pressure(x);
  EXPECT_NEAR(m.oxygen_excess_ratio(x, Input(100.0, 150.0, 0.0)), 0.0, 1e-12);
}

TEST(OxygenExcess, InverselyProportionalToCurrent) {
  const PlantModel m;
  const State x = test::loaded_point(m).x;
  const double a = m.oxygen_excess_ratio(x, Input(100.0, 100.0, 0.0));
  EXPECT_LT(rel_err(m.oxygen_excess_ratio(x, Input(100.0, 200.0, 0.0)), 0.5 * a), 1e-14);
}

TEST(Hydrogen, FaradayLaw) {
  const PlantModel m;
  EXPECT_EQ(m.hydrogen_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(m.hydrogen_rate(200.0), 2.0 * m.hydrogen_rate(100.0));
  const double expect = 381.0 * 100.0 / (2.0 * 96485.33212) * 0.002016;
  EXPECT_LT(rel_err(m.hydrogen_rate(100.0), expect), 1e-12);
  EXPECT_NEAR(m.hydrogen_rate(100.0), 3.98e-4, 5e-7);
}
