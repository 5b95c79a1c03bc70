#pragma once

#include <array>
#include <optional>
#include <string>

namespace fcplan {

// Fuel-cell stack and air-supply parameters. Defaults are the published
// table values for the 381-cell stack.
struct FcParams {
  double n_cells = 381.0;
  double v_ca = 0.01;           // cathode volume [m^3]
  double v_sm = 0.02;           // supply manifold volume [m^3]
  double eta_cm = 0.98;         // motor mechanical efficiency
  double eta_cp = 0.80;         // compressor efficiency
  double r_cm = 0.82;           // motor resistance [Ohm]
  double j_cp = 5e-5;           // compressor + motor inertia [kg m^2]
  double k_t = 0.0153;          // torque constant [N m / A]
  double k_v = 0.0153;          // back-EMF constant [V s / rad]
  double gamma = 1.4;
  double c_p = 1004.0;          // air specific heat [J/(kg K)]
  double c_d = 0.0124;          // cathode outlet throttle discharge coeff.
  double a_t = 0.002;           // cathode outlet throttle area [m^2]
  double k_ca_in = 3.629e-6;    // cathode inlet orifice [kg/(s Pa)]
  double y_o2_atm = 0.21;       // oxygen molar ratio in dry air
  double t_st = 353.15;         // stack temperature [K]
  double t_atm = 298.15;        // ambient temperature [K]
  double phi_atm = 0.5;         // ambient relative humidity
  double p_atm = 101325.0;      // ambient pressure [Pa]
  // Gas constant used in the throttle nozzle law. The reduced air-path model
  // this stack data comes from evaluates the nozzle with the universal gas
  // constant; set to 287.0 for the per-mass air constant instead.
  double nozzle_gas_constant = 8.314462618;
  // Relative width of the smoothed zero-differential region of the nozzle law,
  // expressed in 1 - (p_atm/p_ca)^((gamma-1)/gamma).
  double nozzle_smoothing = 0.02;
  // Speed below which the compressor load torque is faded out [rad/s].
  double omega_regularization = 10.0;
};

// Smooth compressor map: W = relu_s(k_speed * omega - k_head * ((p/p_atm)^c12 - 1)).
struct CompressorMapParams {
  double k_speed = 1.17e-5;     // [kg/s per rad/s]
  double k_head = 0.1;          // [kg/s per unit isentropic head ratio]
  double smoothing = 1e-4;      // width of the C1 knee at zero flow [kg/s]
};

// Cell polarization fit (current density in A/cm^2).
struct PolarizationParams {
  double cell_area_cm2 = 280.0;
  double e0 = 0.98;             // open-circuit voltage at p_ref [V]
  double p_ref = 101325.0;      // Nernst reference oxygen pressure [Pa]
  double p_floor = 100.0;       // keeps the Nernst log finite at p_O2 = 0 [Pa]
  double v_act = 0.30;          // activation loss amplitude [V]
  double i_act = 0.05;          // activation current-density scale [A/cm^2]
  double r_ohm = 0.10;          // area-specific resistance [Ohm cm^2]
  double m_conc = 0.003;        // concentration loss amplitude [V]
  double i_conc = 0.9;          // concentration current-density scale [A/cm^2]
};

// Cell-level exponential fits: value(s) = a * exp(b * s) + c, s = v_soc.
struct ExpFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double value(double soc) const;
  double slope(double soc) const;
};

// Lithium-ion cell equivalent circuit (runtime-based electrical model),
// scaled to a series/parallel pack.
struct BatteryParams {
  double n_series = 15.0;
  double n_parallel = 12.0;
  double capacity_ah = 12.0;    // pack capacity
  double r_sd = 3000.0;         // self-discharge resistance, per unit v_soc [Ohm]
  // OCV(s) = o_a * exp(o_b s) + o_c + o_d s + o_e s^2 + o_f s^3  [V per cell]
  double ocv_a = -1.031;
  double ocv_b = -35.0;
  double ocv_c = 3.685;
  double ocv_d = 0.2156;
  double ocv_e = -0.1178;
  double ocv_f = 0.3201;
  ExpFit r_series{0.1562, -24.37, 0.07446};
  ExpFit r_s{0.3208, -29.14, 0.04669};
  ExpFit c_s{-752.9, -13.51, 703.6};
  ExpFit r_f{6.603, -155.2, 0.04984};
  ExpFit c_f{-6056.0, -27.12, 4475.0};

  double c_b() const { return 3600.0 * capacity_ah; }
  // Pack-level quantities at SOC s.
  double ocv(double soc) const;
  double ocv_slope(double soc) const;
  double pack_resistance(const ExpFit& fit, double soc) const;
  double pack_resistance_slope(const ExpFit& fit, double soc) const;
  double pack_capacitance(const ExpFit& fit, double soc) const;
  double pack_capacitance_slope(const ExpFit& fit, double soc) const;
};

// Lumped coefficients of the four-state air-path model.
struct DerivedCoeffs {
  std::array<double, 16> c{};  // c[0] is c1
  double operator()(int i) const { return c[static_cast<std::size_t>(i - 1)]; }
  // Auxiliary quantities shared with the output maps.
  double o2_mass_fraction_in = 0.0;  // wet inlet O2 mass fraction
  double humidity_ratio_atm = 0.0;
};

struct PlantParams {
  FcParams fc;
  CompressorMapParams compressor;
  PolarizationParams polarization;
  BatteryParams battery;
  // Verbatim values for c1..c16 that replace the reconstructed ones.
  std::array<std::optional<double>, 16> coeff_overrides{};
};

// Saturation pressure of water vapour [Pa] (Buck equation).
double saturation_pressure(double temperature_k);

// Reconstruct c1..c16 from the physical parameters; applies overrides.
// Throws std::invalid_argument on non-physical input.
DerivedCoeffs derive_coefficients(const PlantParams& params);
DerivedCoeffs derive_coefficients(const FcParams& fc);

// Human-readable dump of c1..c16 with their defining formulas.
std::string model_ledger(const PlantParams& params, const DerivedCoeffs& coeffs);

}  // namespace fcplan
