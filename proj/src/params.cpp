#include "fcplan/params.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fcplan/types.hpp"

namespace fcplan {

double ExpFit::value(double soc) const { return a * std::exp(b * soc) + c; }
double ExpFit::slope(double soc) const { return a * b * std::exp(b * soc); }

double BatteryParams::ocv(double soc) const {
  const double cell = ocv_a * std::exp(ocv_b * soc) + ocv_c + ocv_d * soc +
                      ocv_e * soc * soc + ocv_f * soc * soc * soc;
  return n_series * cell;
}

double BatteryParams::ocv_slope(double soc) const {
  const double cell = ocv_a * ocv_b * std::exp(ocv_b * soc) + ocv_d +
                      2.0 * ocv_e * soc + 3.0 * ocv_f * soc * soc;
  return n_series * cell;
}

double BatteryParams::pack_resistance(const ExpFit& fit, double soc) const {
  return fit.value(soc) * n_series / n_parallel;
}
double BatteryParams::pack_resistance_slope(const ExpFit& fit, double soc) const {
  return fit.slope(soc) * n_series / n_parallel;
}
double BatteryParams::pack_capacitance(const ExpFit& fit, double soc) const {
  return fit.value(soc) * n_parallel / n_series;
}
double BatteryParams::pack_capacitance_slope(const ExpFit& fit, double soc) const {
  return fit.slope(soc) * n_parallel / n_series;
}

double saturation_pressure(double temperature_k) {
  const double t = temperature_k - 273.15;
  return 611.21 * std::exp((18.678 - t / 234.5) * (t / (257.14 + t)));
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("parameter must be positive: ") + name);
  }
}

void require_fraction(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string("parameter must lie in (0, 1]: ") + name);
  }
}

}  // namespace

DerivedCoeffs derive_coefficients(const FcParams& fc) {
  require_positive(fc.n_cells, "fc.n_cells");
  require_positive(fc.v_ca, "fc.v_ca");
  require_positive(fc.v_sm, "fc.v_sm");
  require_positive(fc.t_st, "fc.t_st");
  require_positive(fc.t_atm, "fc.t_atm");
  require_positive(fc.p_atm, "fc.p_atm");
  require_positive(fc.r_cm, "fc.r_cm");
  require_positive(fc.j_cp, "fc.j_cp");
  require_positive(fc.k_t, "fc.k_t");
  require_positive(fc.k_v, "fc.k_v");
  require_positive(fc.c_p, "fc.c_p");
  require_positive(fc.k_ca_in, "fc.k_ca_in");
  require_fraction(fc.eta_cm, "fc.eta_cm");
  require_fraction(fc.eta_cp, "fc.eta_cp");
  require_fraction(fc.y_o2_atm, "fc.y_o2_atm");
  require_fraction(fc.phi_atm, "fc.phi_atm");
  if (!(fc.gamma > 1.0)) throw std::invalid_argument("parameter must exceed 1: fc.gamma");

  using namespace phys;
  const double rt_st = kGasConstant * fc.t_st;

  const double x_o2_dry = fc.y_o2_atm * kMolarO2 /
                          (fc.y_o2_atm * kMolarO2 + (1.0 - fc.y_o2_atm) * kMolarN2);
  const double p_vap_atm = fc.phi_atm * saturation_pressure(fc.t_atm);
  const double humidity_ratio = kMolarVapor / kMolarAir * p_vap_atm / (fc.p_atm - p_vap_atm);
  const double x_o2_wet = x_o2_dry / (1.0 + humidity_ratio);
  const double x_n2_wet = (1.0 - x_o2_dry) / (1.0 + humidity_ratio);

  DerivedCoeffs d;
  auto& c = d.c;
  c[0] = rt_st * x_o2_wet * fc.k_ca_in / (kMolarO2 * fc.v_ca);
  c[1] = saturation_pressure(fc.t_st);
  c[2] = rt_st / fc.v_ca;
  c[3] = kMolarO2;
  c[4] = kMolarN2;
  c[5] = kMolarVapor * c[1];
  c[6] = rt_st * fc.n_cells / (4.0 * kFaraday * fc.v_ca);
  c[7] = rt_st * x_n2_wet * fc.k_ca_in / (kMolarN2 * fc.v_ca);
  c[8] = fc.eta_cm * fc.k_t * fc.k_v / (fc.r_cm * fc.j_cp);
  c[9] = fc.c_p * fc.t_atm / (fc.j_cp * fc.eta_cp);
  c[10] = fc.p_atm;
  c[11] = (fc.gamma - 1.0) / fc.gamma;
  c[12] = fc.eta_cm * fc.k_t / (fc.r_cm * fc.j_cp);
  c[13] = fc.gamma * (kGasConstant / kMolarAir) * fc.t_atm / fc.v_sm;
  c[14] = 1.0 / fc.eta_cp;
  c[15] = fc.k_ca_in;
  d.o2_mass_fraction_in = x_o2_wet;
  d.humidity_ratio_atm = humidity_ratio;
  return d;
}

DerivedCoeffs derive_coefficients(const PlantParams& params) {
  DerivedCoeffs d = derive_coefficients(params.fc);
  for (std::size_t i = 0; i < d.c.size(); ++i) {
    if (params.coeff_overrides[i]) d.c[i] = *params.coeff_overrides[i];
  }
  for (double v : d.c) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite model coefficient");
  }
  if (!(d(7) > 0.0)) throw std::invalid_argument("c7 must be positive");
  if (!(d(11) > 0.0)) throw std::invalid_argument("c11 must be positive");
  return d;
}

std::string model_ledger(const PlantParams& params, const DerivedCoeffs& coeffs) {
  static constexpr std::array<const char*, 16> kFormula = {
      "R*T_st*x_O2,in/(M_O2*V_ca)*k_ca,in",
      "p_sat(T_st)",
      "R*T_st/V_ca",
      "M_O2",
      "M_N2",
      "M_v*p_sat(T_st)",
      "R*T_st*n/(4*F*V_ca)",
      "R*T_st*x_N2,in/(M_N2*V_ca)*k_ca,in",
      "eta_cm*k_t*k_v/(R_cm*J_cp)",
      "C_p*T_atm/(J_cp*eta_cp)  (load torque uses c10/omega)",
      "p_atm",
      "(gamma-1)/gamma",
      "eta_cm*k_t/(R_cm*J_cp)",
      "gamma*R_air*T_atm/V_sm",
      "1/eta_cp",
      "k_ca,in",
  };
  std::ostringstream os;
  os << "# air-path model coefficients\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < 16; ++i) {
    os << "c" << (i + 1) << " = " << coeffs.c[i] << "    # "
       << (params.coeff_overrides[i] ? "override" : kFormula[i]) << "\n";
  }
  os << "x_O2,in (wet mass fraction) = " << coeffs.o2_mass_fraction_in << "\n";
  os << "humidity ratio (ambient) = " << coeffs.humidity_ratio_atm << "\n";
  os << "battery C_b = " << params.battery.c_b() << " A s per unit v_soc\n";
  return os.str();
}

}  // namespace fcplan
