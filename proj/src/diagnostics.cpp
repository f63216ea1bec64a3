#include "concentra/diagnostics.hpp"

#include "concentra/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concentra {

MacroSeries macro_series(const std::vector<SimulationState>& states, const GrowthModel& model,
                         double epsilon) {
  MacroSeries out;
  for (const auto& s : states) {
    const auto& grid = s.density.grid;
    const auto& n = s.density.values;
    const double rho = integrate(s.density);
    double I = rho, J = 0.0;
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
      I = g->weight ? integrate(s.density, g->weight) : rho;
      for (std::size_t k = 0; k < n.size(); ++k) {
        if (n[k] == 0.0) continue;
        const TraitPoint x = grid.node(k);
        J += (g->weight ? g->weight(x) : 1.0) * g->rate(x, I) * n[k];
      }
    } else {
      const auto& m = std::get<LocalCompetitionModel>(model);
      const ScalarField comp = convolve_kernel(s.density, m);
      for (std::size_t k = 0; k < n.size(); ++k)
        if (n[k] != 0.0) J += (m.intrinsic_rate(grid.node(k)) - comp.values[k]) * n[k];
    }
    J *= grid.cell_volume() / epsilon;
    out.push(s.time, I, rho, J, boundary_mass(s.density, 2));
  }
  return out;
}

double total_variation(const std::vector<double>& s) {
  double tv = 0.0;
  for (std::size_t k = 1; k < s.size(); ++k) tv += std::abs(s[k] - s[k - 1]);
  return tv;
}

double monotonicity_violation(const std::vector<double>& s) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < s.size(); ++k) m = std::min(m, s[k] - s[k - 1]);
  return m;
}

namespace {

void summarize(ResidualSeries& r) {
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    r.max_all = std::max(r.max_all, r.residual[k]);
    if (r.times[k] >= r.t_layer - 1e-12) r.max_post_layer = std::max(r.max_post_layer, r.residual[k]);
  }
}

}  // namespace

ResidualSeries constraint_residual(const ConcentrationTrajectory& traj, const GrowthModel& model,
                                   double t_layer) {
  ResidualSeries r;
  r.t_layer = t_layer;
  for (const auto& s : traj.samples) {
    double v;
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
      v = g->rate(s.x_bar, s.macro);
    } else {
      const auto& m = std::get<LocalCompetitionModel>(model);
      v = m.intrinsic_rate(s.x_bar) - s.macro * m.kernel(s.x_bar, s.x_bar);
    }
    r.times.push_back(s.t);
    r.residual.push_back(std::abs(v));
  }
  summarize(r);
  return r;
}

ResidualSeries constraint_residual(const MacroSeries& series, const ConcentrationTrajectory& traj,
                                   const GlobalInteractionModel& model, double t_layer) {
  if (series.size() != traj.size())
    throw ValidationError("series", "macro series and trajectory are not paired");
  ResidualSeries r;
  r.t_layer = t_layer;
  for (std::size_t k = 0; k < series.size(); ++k) {
    r.times.push_back(series.times[k]);
    r.residual.push_back(std::abs(model.rate(traj.samples[k].x_bar, series.I[k])));
  }
  summarize(r);
  return r;
}

TraitPoint interpolate_position(const ConcentrationTrajectory& traj, double t) {
  const auto& s = traj.samples;
  if (s.empty()) throw ValidationError("trajectory", "is empty");
  if (t <= s.front().t) return s.front().x_bar;
  if (t >= s.back().t) return s.back().x_bar;
  const auto it = std::upper_bound(s.begin(), s.end(), t,
                                   [](double v, const TrajectorySample& q) { return v < q.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double w = (t - a.t) / (b.t - a.t);
  return (1.0 - w) * a.x_bar + w * b.x_bar;
}

TrajectoryComparison compare_trajectories(const ConcentrationTrajectory& a,
                                          const ConcentrationTrajectory& b) {
  if (a.empty() || b.empty()) throw ValidationError("trajectory", "cannot compare empty trajectories");
  const double lo = std::max(a.samples.front().t, b.samples.front().t);
  const double hi = std::min(a.samples.back().t, b.samples.back().t);
  if (lo > hi) throw ValidationError("trajectory", "time ranges do not overlap");
  std::vector<double> ts;
  for (const auto* traj : {&a, &b})
    for (const auto& s : traj->samples)
      if (s.t >= lo && s.t <= hi) ts.push_back(s.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double x, double y) { return std::abs(x - y) <= 1e-12 * (1.0 + std::abs(x)); }),
           ts.end());
  TrajectoryComparison c;
  for (double t : ts) {
    const double dist = (interpolate_position(a, t) - interpolate_position(b, t)).norm();
    c.times.push_back(t);
    c.distance.push_back(dist);
    c.sup_distance = std::max(c.sup_distance, dist);
  }
  return c;
}

nlohmann::json to_json(const CheckReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  };
  return {{"check_name", r.check_name},
          {"value", num(r.value)},
          {"threshold", num(r.threshold)},
          {"verdict", r.informational ? "info" : (r.verdict ? "pass" : "fail")},
          {"window", r.window}};
}

}  // namespace concentra
