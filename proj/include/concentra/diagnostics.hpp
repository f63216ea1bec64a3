#pragma once

#include "concentra/model.hpp"
#include "concentra/pde.hpp"
#include "concentra/series.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace concentra {

MacroSeries macro_series(const std::vector<SimulationState>& states, const GrowthModel& model,
                         double epsilon);

/// Σ |s_{i+1} - s_i|.
double total_variation(const std::vector<double>& series);

/// min_i (s_{i+1} - s_i); +inf for fewer than two values.
double monotonicity_violation(const std::vector<double>& series);

struct ResidualSeries {
  std::vector<double> times;
  std::vector<double> residual;
  double t_layer = 0.0;
  double max_all = 0.0;
  /// Max over samples with t >= t_layer.
  double max_post_layer = 0.0;
};

/// |R(x̄, Ī)| (global) or |r(x̄) - ρ̄ C(x̄, x̄)| (local) along a trajectory.
ResidualSeries constraint_residual(const ConcentrationTrajectory& traj, const GrowthModel& model,
                                   double t_layer);
/// |R(x̄_ε(t_i), I_ε(t_i))| pairing a MacroSeries with the x̄ samples of the same run.
ResidualSeries constraint_residual(const MacroSeries& series, const ConcentrationTrajectory& traj,
                                   const GlobalInteractionModel& model, double t_layer);

struct TrajectoryComparison {
  double sup_distance = 0.0;
  std::vector<double> times;
  std::vector<double> distance;
};

/// Euclidean |x̄_a(t) - x̄_b(t)| on the union of sample times inside the common
/// range, with linear interpolation. Throws ValidationError on disjoint ranges.
TrajectoryComparison compare_trajectories(const ConcentrationTrajectory& a,
                                          const ConcentrationTrajectory& b);

/// x̄ at time t by linear interpolation, clamped to the sampled range.
TraitPoint interpolate_position(const ConcentrationTrajectory& traj, double t);

struct CheckReport {
  std::string check_name;
  double value = 0.0;
  double threshold = 0.0;
  bool verdict = false;
  std::string window;
  /// Reported without a pass/fail judgement; serialized with verdict "info".
  bool informational = false;
};

nlohmann::json to_json(const CheckReport& report);

}  // namespace concentra
