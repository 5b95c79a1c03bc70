#pragma once

#include <Eigen/Dense>

namespace fcplan {

inline constexpr int kNumStates = 8;
inline constexpr int kNumInputs = 3;

// x = [p_O2, p_N2, omega_cp, p_sm, v_soc, v_s, v_f, q_dis]
using State = Eigen::Matrix<double, kNumStates, 1>;
// u = [v_cm, I_st, I_bat], I_bat > 0 is discharge
using Input = Eigen::Matrix<double, kNumInputs, 1>;

using StateJacobian = Eigen::Matrix<double, kNumStates, kNumStates>;
using InputJacobian = Eigen::Matrix<double, kNumStates, kNumInputs>;

namespace sx {
inline constexpr int kPO2 = 0;
inline constexpr int kPN2 = 1;
inline constexpr int kOmegaCp = 2;
inline constexpr int kPsm = 3;
inline constexpr int kVsoc = 4;
inline constexpr int kVs = 5;
inline constexpr int kVf = 6;
inline constexpr int kQdis = 7;
}  // namespace sx

namespace su {
inline constexpr int kVcm = 0;
inline constexpr int kIst = 1;
inline constexpr int kIbat = 2;
}  // namespace su

// Physical constants (SI).
namespace phys {
inline constexpr double kGasConstant = 8.314462618;   // J/(mol K)
inline constexpr double kFaraday = 96485.33212;       // C/mol
inline constexpr double kMolarO2 = 0.032;             // kg/mol
inline constexpr double kMolarN2 = 0.028;
inline constexpr double kMolarVapor = 0.018;
inline constexpr double kMolarH2 = 0.002016;
inline constexpr double kMolarAir = 0.02897;
inline constexpr double kAtmosphere = 101325.0;       // Pa
}  // namespace phys

}  // namespace fcplan
