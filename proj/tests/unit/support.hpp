#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "fcplan/mpc.hpp"
#include "fcplan/plant.hpp"
#include "fcplan/selfcheck.hpp"

namespace fcplan::test {

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Worst entry of |a - b| / max(|b|, floor), column by column.
template <class A, class B>
double matrix_rel_err(const A& a, const B& b, double floor) {
  double worst = 0.0;
  for (int j = 0; j < b.cols(); ++j) {
    const double scale = std::max(b.col(j).cwiseAbs().maxCoeff(), floor);
    worst = std::max(worst, (a.col(j) - b.col(j)).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

// A loaded operating point of the default stack.
inline OperatingPoint loaded_point(const PlantModel& m, double power = 30000.0, double lambda = 1.8) {
  InitialStatePolicy p;
  p.lambda_target = lambda;
  return steady_state(m, power, p);
}

}  // namespace fcplan::test
