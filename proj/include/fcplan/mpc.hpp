#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fcplan/ocp.hpp"
#include "fcplan/plant.hpp"
#include "fcplan/solver.hpp"

namespace fcplan {

// Piecewise-constant demand. breakpoints are (time [s], level [W]); the
// level before the first breakpoint is the first level.
struct DemandProfile {
  std::vector<std::pair<double, double>> breakpoints{{0.0, 0.0}};
  double preview = 0.5;         // T_h [s]
  double preview_offset = 0.0;  // window starts at t + preview_offset

  void validate() const;
  double level(double t) const;
  std::vector<double> step_times() const;  // times where the level changes
};

// Samples at t + preview_offset + k dt, k = 0..n-1; holds the last level
// past the end of the profile.
std::vector<double> preview_window(const DemandProfile& profile, double t, int n, double dt);

struct InitialStatePolicy {
  double v_soc = 0.8;
  double lambda_target = 1.55;  // O2 excess ratio of the initial operating point
};

struct ScenarioConfig {
  PlantParams plant;
  // 30 kW is about 40% of the stack's peak gross power; steps of +25% and +15%.
  DemandProfile demand{{{0.0, 30000.0}, {2.0, 37500.0}, {2.2, 43125.0}}};
  double duration = 4.0;
  double dt = 0.05;
  int horizon = 10;
  int model_substeps = kDefaultSubsteps;
  int plant_substeps = 50;
  CostWeights weights;
  double cost_scale = 1e-4;  // objective multiplier inside each solve
  IncrementReference increment = IncrementReference::Nominal;
  ConstraintSet constraints;
  SolverOptions solver;
  InitialStatePolicy initial;
  bool record_wall_time = false;
  // Used by the sweep command.
  std::vector<double> budgets{72.0, 36.0, 18.0, 3.6};

  void validate() const;
  int num_steps() const;
};

struct OperatingPoint {
  State x = State::Zero();
  Input u = Input::Zero();
};

// Fuel-cell equilibrium delivering net power `power` at O2 excess ratio
// lambda_target with the battery idle. power <= 0 gives the rest state.
// Throws PlantError if no equilibrium is found.
OperatingPoint steady_state(const PlantModel& model, double power, const InitialStatePolicy& p);

struct SimRecord {
  double t = 0.0;
  State x = State::Zero();
  Input u = Input::Zero();
  double p_sys = 0.0;
  double p_ref = 0.0;
  double lambda_o2 = 0.0;
  double h2_cum = 0.0;  // kg, including this step
  SolveStatus status = SolveStatus::Converged;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double solver_violation = 0.0;  // scaled, over the planned window
  double wall_ms = 0.0;
  int clamp_events = 0;
  bool fallback = false;      // previous input re-applied
  bool al_monotone = true;    // accepted iterates decreased the AL objective
  Eigen::Matrix<double, kNumConstraintRows, 1> residuals;  // at (x, u)
};

struct SimLog {
  std::vector<SimRecord> records;
  double h2_total_kg = 0.0;
  double q_dis_final = 0.0;
  bool aborted = false;
  std::string abort_reason;

  int non_converged_steps() const;
  int clamp_activations() const;
  // Largest scaled plant-side residual over all logged steps.
  double max_violation() const;
  double tracking_rms() const;
};

SimLog run_closed_loop(const ScenarioConfig& cfg);

struct SweepRow {
  double q_max = 0.0;
  double h2_total_g = 0.0;
  double q_dis_final = 0.0;
  double max_violation = 0.0;
  double tracking_rms = 0.0;
  bool ok = true;  // every step Converged and the run completed
  std::string error;
  SimLog log;
};

// One closed-loop run per budget, `jobs` at a time; rows follow budget order.
std::vector<SweepRow> sweep_qmax(const ScenarioConfig& cfg, const std::vector<double>& budgets,
                                 int jobs = 1);

void write_sim_csv(std::ostream& os, const SimLog& log);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::string summary_text(const ScenarioConfig& cfg, const SimLog& log);

}  // namespace fcplan
