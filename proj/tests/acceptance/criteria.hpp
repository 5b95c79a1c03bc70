#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fcplan/mpc.hpp"

namespace fcplan::acceptance {

struct Verdict {
  bool pass = true;
  std::string detail;
};

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// q_dis at every logged instant plus the state after the last step.
inline std::vector<double> discharge_series(const SimLog& log) {
  std::vector<double> q;
  for (const auto& r : log.records) q.push_back(r.x(sx::kQdis));
  q.push_back(log.q_dis_final);
  return q;
}

inline std::vector<double> time_series(const SimLog& log, double dt) {
  std::vector<double> t;
  for (const auto& r : log.records) t.push_back(r.t);
  t.push_back(log.records.empty() ? 0.0 : log.records.back().t + dt);
  return t;
}

inline double largest_drop(const std::vector<double>& q) {
  double worst = 0.0;
  for (std::size_t i = 1; i < q.size(); ++i) worst = std::max(worst, q[i - 1] - q[i]);
  return worst;
}

// A sample no higher than its neighbours that sits at least `depth` below
// the highest value within `span` seconds on each side.
inline bool has_local_minimum(const std::vector<double>& t, const std::vector<double>& q, double t_lo,
                              double t_hi, double span, double depth) {
  for (std::size_t k = 1; k + 1 < q.size(); ++k) {
    if (t[k] < t_lo - 1e-9 || t[k] > t_hi + 1e-9) continue;
    if (q[k] > q[k - 1] || q[k] > q[k + 1]) continue;
    double left = q[k], right = q[k];
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (t[j] >= t[k] - span - 1e-9 && t[j] < t[k]) left = std::max(left, q[j]);
      if (t[j] > t[k] && t[j] <= t[k] + span + 1e-9) right = std::max(right, q[j]);
    }
    if (left - q[k] >= depth && right - q[k] >= depth) return true;
  }
  return false;
}

inline bool near_step(double t, const std::vector<double>& steps, double window) {
  return std::any_of(steps.begin(), steps.end(),
                     [&](double s) { return std::abs(t - s) <= window + 1e-9; });
}

struct TrackingStats {
  double worst_relative = 0.0;
  double rms = 0.0;
  double mean_demand = 0.0;
  int samples = 0;
};

inline TrackingStats tracking_outside_steps(const SimLog& log, const std::vector<double>& steps,
                                            double window) {
  TrackingStats s;
  double sq = 0.0, demand = 0.0;
  for (const auto& r : log.records) {
    if (near_step(r.t, steps, window)) continue;
    const double err = r.p_sys - r.p_ref;
    s.worst_relative = std::max(s.worst_relative, std::abs(err) / std::max(r.p_ref, 1000.0));
    sq += err * err;
    demand += r.p_ref;
    ++s.samples;
  }
  if (s.samples > 0) {
    s.rms = std::sqrt(sq / s.samples);
    s.mean_demand = demand / s.samples;
  }
  return s;
}

inline double input_at(const SimLog& log, double t, int index) {
  for (const auto& r : log.records) {
    if (std::abs(r.t - t) < 1e-9) return r.u(index);
  }
  return std::nan("");
}

}  // namespace fcplan::acceptance
