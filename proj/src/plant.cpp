#include "fcplan/plant.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace fcplan {

namespace {

// sqrt(z) with a C1 odd-cubic core on |z| < z0 and a linear continuation
// below zero, so the nozzle law has a finite slope at zero differential.
std::pair<double, double> smoothed_sqrt(double z, double z0) {
  const double a = 1.25 / std::sqrt(z0);
  const double b = -0.25 / std::pow(z0, 2.5);
  if (z >= z0) {
    const double s = std::sqrt(z);
    return {s, 0.5 / s};
  }
  if (z >= 0.0) return {a * z + b * z * z * z, a + 3.0 * b * z * z};
  return {a * z, a};
}

// Zero below 0, quadratic knee on [0, 2s], identity minus s above.
std::pair<double, double> soft_relu(double g, double s) {
  if (g <= 0.0) return {0.0, 0.0};
  if (g < 2.0 * s) return {g * g / (4.0 * s), g / (2.0 * s)};
  return {g - s, 1.0};
}

// (p/p_ref)^e - 1 and its slope.
std::pair<double, double> head(double p, double p_ref, double e) {
  const double ratio = std::max(p, 1.0) / p_ref;
  const double pw = std::pow(ratio, e);
  return {pw - 1.0, e * pw / (ratio * p_ref)};
}

}  // namespace

PlantModel::PlantModel() : PlantModel(PlantParams{}) {}

PlantModel::PlantModel(PlantParams params)
    : params_(std::move(params)), coeffs_(derive_coefficients(params_)) {}

Scalar2 PlantModel::psi_ca(double p_o2, double p_n2) const {
  const FcParams& fc = params_.fc;
  const double g = fc.gamma;
  const double e = (g - 1.0) / g;
  const double k = fc.c_d * fc.a_t / std::sqrt(fc.nozzle_gas_constant * fc.t_st);
  const double p = std::max(p_o2 + p_n2 + coeffs_(2), 1.0);
  const double r = fc.p_atm / p;
  const double r_crit = std::pow(2.0 / (g + 1.0), g / (g - 1.0));

  double w = 0.0;
  double dw = 0.0;
  if (r <= r_crit) {
    const double choked = std::sqrt(g) * std::pow(2.0 / (g + 1.0), (g + 1.0) / (2.0 * (g - 1.0)));
    w = k * p * choked;
    dw = k * choked;
  } else {
    const double s = std::sqrt(2.0 / e);
    const double re = std::pow(r, e);
    const double q = p * std::pow(r, 1.0 / g);
    const double dq = e * q / p;
    const double z = 1.0 - re;
    const double dz = e * re / p;
    const auto [h, dh] = smoothed_sqrt(z, fc.nozzle_smoothing);
    w = k * s * q * h;
    dw = k * s * (dq * h + q * dh * dz);
  }
  return {w, dw, dw};
}

Scalar2 PlantModel::psi_cm(double omega_cp, double p_sm) const {
  const auto& cm = params_.compressor;
  const auto [h, dh] = head(p_sm, coeffs_(11), coeffs_(12));
  const double g = cm.k_speed * omega_cp - cm.k_head * h;
  const auto [w, dw] = soft_relu(g, cm.smoothing);
  return {w, dw * cm.k_speed, -dw * cm.k_head * dh};
}

double PlantModel::cathode_pressure(const State& x) const {
  return x(sx::kPO2) + x(sx::kPN2) + coeffs_(2);
}

Eigen::Vector4d PlantModel::fc_dynamics(const State& x, const Input& u) const {
  const auto& c = coeffs_;
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3);
  const double delta = -x1 - x2 + x4 - c(2);
  const double denom = c(4) * x1 + c(5) * x2 + c(6);
  const double w_ca = psi_ca(x1, x2).value;
  const double w_cm = psi_cm(x3, x4).value;
  const auto [h, dh] = head(x4, c(11), c(12));
  const double wr = params_.fc.omega_regularization;
  const double inv_speed = x3 / (x3 * x3 + wr * wr);

  Eigen::Vector4d f;
  f(0) = c(1) * delta - c(3) * x1 * w_ca / denom - c(7) * u(su::kIst);
  f(1) = c(8) * delta - c(3) * x2 * w_ca / denom;
  f(2) = -c(9) * x3 - c(10) * inv_speed * h * w_cm + c(13) * u(su::kVcm);
  f(3) = c(14) * (1.0 + c(15) * h) * (w_cm - c(16) * delta);
  if (!f.allFinite()) throw PlantError("non-finite fuel-cell dynamics");
  return f;
}

Eigen::Vector3d PlantModel::battery_dynamics(const State& x, const Input& u) const {
  const BatteryParams& bp = params_.battery;
  const double soc = x(sx::kVsoc);
  const double i = u(su::kIbat);
  const double cb = bp.c_b();
  const double rs = bp.pack_resistance(bp.r_s, soc);
  const double cs = bp.pack_capacitance(bp.c_s, soc);
  const double rf = bp.pack_resistance(bp.r_f, soc);
  const double cf = bp.pack_capacitance(bp.c_f, soc);
  Eigen::Vector3d f;
  f(0) = -soc / (bp.r_sd * cb) - i / cb;
  f(1) = -x(sx::kVs) / (rs * cs) + i / cs;
  f(2) = -x(sx::kVf) / (rf * cf) + i / cf;
  return f;
}

State PlantModel::dynamics(const State& x, const Input& u) const {
  State f;
  f.head<4>() = fc_dynamics(x, u);
  f.segment<3>(4) = battery_dynamics(x, u);
  f(sx::kQdis) = u(su::kIbat);
  return f;
}

void PlantModel::jacobians(const State& x, const Input& u, StateJacobian& a,
                           InputJacobian& b) const {
  a.setZero();
  b.setZero();
  const auto& c = coeffs_;
  const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3);
  const double delta = -x1 - x2 + x4 - c(2);
  const double denom = c(4) * x1 + c(5) * x2 + c(6);
  const Scalar2 ca = psi_ca(x1, x2);
  const Scalar2 cm = psi_cm(x3, x4);
  const auto [h, dh] = head(x4, c(11), c(12));
  const double wr = params_.fc.omega_regularization;
  const double sq = x3 * x3 + wr * wr;
  const double inv_speed = x3 / sq;
  const double d_inv_speed = (wr * wr - x3 * x3) / (sq * sq);

  // outflow terms: c3 * x_i * psi / denom
  const double w = ca.value;
  const double dw = ca.d_first;
  const double d2 = denom * denom;
  a(0, 0) = -c(1) - c(3) * (w / denom + x1 * dw / denom - x1 * w * c(4) / d2);
  a(0, 1) = -c(1) - c(3) * (x1 * dw / denom - x1 * w * c(5) / d2);
  a(0, 3) = c(1);
  a(1, 0) = -c(8) - c(3) * (x2 * dw / denom - x2 * w * c(4) / d2);
  a(1, 1) = -c(8) - c(3) * (w / denom + x2 * dw / denom - x2 * w * c(5) / d2);
  a(1, 3) = c(8);

  a(2, 2) = -c(9) - c(10) * h * (d_inv_speed * cm.value + inv_speed * cm.d_first);
  a(2, 3) = -c(10) * inv_speed * (dh * cm.value + h * cm.d_second);

  const double gain = c(14) * (1.0 + c(15) * h);
  const double flow = cm.value - c(16) * delta;
  a(3, 0) = gain * c(16);
  a(3, 1) = gain * c(16);
  a(3, 2) = gain * cm.d_first;
  a(3, 3) = c(14) * c(15) * dh * flow + gain * (cm.d_second - c(16));

  b(0, su::kIst) = -c(7);
  b(2, su::kVcm) = c(13);

  const BatteryParams& bp = params_.battery;
  const double soc = x(sx::kVsoc);
  const double i = u(su::kIbat);
  const double cb = bp.c_b();
  a(4, 4) = -1.0 / (bp.r_sd * cb);
  b(4, su::kIbat) = -1.0 / cb;

  auto rc_row = [&](int row, const ExpFit& rfit, const ExpFit& cfit) {
    const double r = bp.pack_resistance(rfit, soc);
    const double dr = bp.pack_resistance_slope(rfit, soc);
    const double cap = bp.pack_capacitance(cfit, soc);
    const double dcap = bp.pack_capacitance_slope(cfit, soc);
    const double tau = r * cap;
    const double dtau = dr * cap + r * dcap;
    a(row, 4) = x(row) * dtau / (tau * tau) - i * dcap / (cap * cap);
    a(row, row) = -1.0 / tau;
    b(row, su::kIbat) = 1.0 / cap;
  };
  rc_row(sx::kVs, bp.r_s, bp.c_s);
  rc_row(sx::kVf, bp.r_f, bp.c_f);

  b(sx::kQdis, su::kIbat) = 1.0;
}

Scalar2 PlantModel::stack_voltage_partials(double p_o2, double i_st) const {
  const auto& pol = params_.polarization;
  const double n = params_.fc.n_cells;
  const double i = i_st / pol.cell_area_cm2;
  const double nernst = phys::kGasConstant * params_.fc.t_st / (4.0 * phys::kFaraday);
  const double p = std::max(p_o2, 0.0) + pol.p_floor;
  const double e_act = std::exp(-i / pol.i_act);
  const double e_conc = std::exp(i / pol.i_conc);
  const double v = pol.e0 + nernst * std::log(p / pol.p_ref) - pol.v_act * (1.0 - e_act) -
                   pol.r_ohm * i - pol.m_conc * (e_conc - 1.0);
  const double dv_dp = p_o2 >= 0.0 ? nernst / p : 0.0;
  const double dv_di =
      -pol.v_act / pol.i_act * e_act - pol.r_ohm - pol.m_conc / pol.i_conc * e_conc;
  return {n * v, n * dv_dp, n * dv_di / pol.cell_area_cm2};
}

double PlantModel::stack_voltage(double p_o2, double i_st) const {
  const double v = stack_voltage_partials(p_o2, i_st).value;
  if (!(v > 0.0)) throw PlantError("stack voltage collapse");
  return v;
}

double PlantModel::battery_terminal_voltage(const State& x, double i_bat) const {
  const BatteryParams& bp = params_.battery;
  const double soc = x(sx::kVsoc);
  return bp.ocv(soc) - x(sx::kVs) - x(sx::kVf) - bp.pack_resistance(bp.r_series, soc) * i_bat;
}

double PlantModel::compressor_power(const State& x, const Input& u) const {
  const double v = u(su::kVcm);
  return v * (v - params_.fc.k_v * x(sx::kOmegaCp)) / params_.fc.r_cm;
}

double PlantModel::system_power(const State& x, const Input& u) const {
  const double i_st = u(su::kIst);
  const double p_stack = i_st == 0.0 ? 0.0 : stack_voltage(x(sx::kPO2), i_st) * i_st;
  const double i_bat = u(su::kIbat);
  return p_stack - compressor_power(x, u) + battery_terminal_voltage(x, i_bat) * i_bat;
}

PowerGradient PlantModel::system_power_gradient(const State& x, const Input& u) const {
  PowerGradient g;
  const FcParams& fc = params_.fc;
  const BatteryParams& bp = params_.battery;
  const double i_st = u(su::kIst);
  const double v_cm = u(su::kVcm);
  const double i_bat = u(su::kIbat);
  const double soc = x(sx::kVsoc);

  const Scalar2 vst = stack_voltage_partials(x(sx::kPO2), i_st);
  const double r_ser = bp.pack_resistance(bp.r_series, soc);
  const double emf = bp.ocv(soc) - x(sx::kVs) - x(sx::kVf);

  g.value = vst.value * i_st - compressor_power(x, u) + (emf - r_ser * i_bat) * i_bat;
  g.d_x(sx::kPO2) = vst.d_first * i_st;
  g.d_x(sx::kOmegaCp) = v_cm * fc.k_v / fc.r_cm;
  g.d_x(sx::kVsoc) =
      bp.ocv_slope(soc) * i_bat - bp.pack_resistance_slope(bp.r_series, soc) * i_bat * i_bat;
  g.d_x(sx::kVs) = -i_bat;
  g.d_x(sx::kVf) = -i_bat;
  g.d_u(su::kVcm) = -(2.0 * v_cm - fc.k_v * x(sx::kOmegaCp)) / fc.r_cm;
  g.d_u(su::kIst) = vst.value + i_st * vst.d_second;
  g.d_u(su::kIbat) = emf - 2.0 * r_ser * i_bat;
  return g;
}

double PlantModel::oxygen_inflow(const State& x) const {
  return coeffs_.o2_mass_fraction_in * params_.fc.k_ca_in *
         (x(sx::kPsm) - cathode_pressure(x));
}

double PlantModel::oxygen_consumption(double i_st) const {
  return phys::kMolarO2 * params_.fc.n_cells * i_st / (4.0 * phys::kFaraday);
}

double PlantModel::oxygen_excess_ratio(const State& x, const Input& u) const {
  const double i_st = u(su::kIst);
  if (i_st <= kLambdaCurrentEpsilon) return kLambdaSentinel;
  return oxygen_inflow(x) / oxygen_consumption(i_st);
}

double hydrogen_rate(double i_st, const FcParams& fc) {
  return phys::kMolarH2 * fc.n_cells * i_st / (2.0 * phys::kFaraday);
}

double PlantModel::hydrogen_rate(double i_st) const { return fcplan::hydrogen_rate(i_st, params_.fc); }

}  // namespace fcplan
