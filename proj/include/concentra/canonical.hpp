#pragma once

#include "concentra/model.hpp"
#include "concentra/series.hpp"

#include <optional>
#include <string>
#include <vector>

namespace concentra {

// Dynamics of the concentration point in the limit of vanishing diffusion.

enum class ClosureMode { FromPde, Frozen, Riccati };

std::string to_string(ClosureMode mode);
ClosureMode parse_closure(const std::string& s);

/// Measured D²u(t, x̄(t)) samples, linearly interpolated and clamped at the ends.
struct HessianFeed {
  std::vector<double> times;
  std::vector<TraitMatrix> hessians;

  /// Keeps only samples whose Hessian is finite.
  static HessianFeed from_trajectory(const ConcentrationTrajectory& traj);
  TraitMatrix at(double t) const;
};

struct HessianClosure {
  ClosureMode mode = ClosureMode::Riccati;
  TraitMatrix initial_hessian;
  std::optional<HessianFeed> feed;
};

/// ẋ = (-H)⁻¹ ∇R(x, Ī(x)).
TraitPoint canonical_rhs(const TraitPoint& x_bar, const TraitMatrix& hessian,
                         const GlobalInteractionModel& model);
/// ẋ = (-H)⁻¹ [∇r(x) - ρ̄ ∇ₓC(x, x)] with ρ̄ = r(x) / C(x, x).
TraitPoint canonical_rhs(const TraitPoint& x_bar, const TraitMatrix& hessian,
                         const LocalCompetitionModel& model);

/// Approximate closure Ḣ = D²R(x̄, macro) + 2H², dropping the D³u·ẋ transport term.
TraitMatrix riccati_hessian_rhs(const TraitPoint& x_bar, double macro, const TraitMatrix& hessian,
                                const GlobalInteractionModel& model);
/// Local form: D²r(x̄) - ρ̄ D²ₓC(x̄, x̄) + 2H².
TraitMatrix riccati_hessian_rhs(const TraitPoint& x_bar, double macro, const TraitMatrix& hessian,
                                const LocalCompetitionModel& model);

/// Ī(x) for the global model, r(x) / C(x, x) for the local one.
double limit_macro(const GrowthModel& model, const TraitPoint& x);

struct CanonicalResult {
  ConcentrationTrajectory trajectory;
  /// Set when x̄ left the domain; the trajectory stops at the last inside sample.
  std::optional<double> exit_time;
};

/// Classical RK4 on x̄ (and H in riccati mode), sampled every dt on [0, T].
CanonicalResult integrate_canonical(const TraitPoint& x0, const HessianClosure& closure,
                                    const GrowthModel& model, double dt, double T,
                                    const std::optional<Box>& domain = std::nullopt);

/// Predicted dĪ/dt = (-1/R_I) ∇R·(-H)⁻¹∇R.
double gradient_flow_rate(const TraitPoint& x_bar, const TraitMatrix& hessian,
                          const GlobalInteractionModel& model);

struct WeightSeries {
  std::vector<double> times;
  std::vector<double> rho;
};

/// RK4 for dρ/dt = ρ R(y, ψ(y) ρ) (global) or ρ [r(y) - ρ C(y, y)] (local).
WeightSeries no_mutation_weight_ode(const TraitPoint& y, double rho0, const GrowthModel& model,
                                    double dt, double T);

struct Attractor {
  bool found = false;
  TraitPoint point;
  /// I_M (global) or ρ̄_∞ (local).
  double macro = 0.0;
  std::string diagnostic;
};

/// Global: joint root of ∇ₓR(x, I) = 0 and R(x, I) = 0. Local: argmax of Φ on
/// {r > 0}. Newton from the box centre, then from a 5x5 (or 5-point) lattice.
Attractor long_time_attractor(const GrowthModel& model, const Box& box);

struct PersistenceReport {
  double K = 0.0;
  bool r_positive = true;
  double r_initial = 0.0;
  double r_min = 0.0;
};

/// Smallest K >= 0 with r(x̄(t)) >= r(x̄⁰) e^{-Kt} on every sample.
PersistenceReport persistence_envelope(const ConcentrationTrajectory& traj,
                                       const LocalCompetitionModel& model);

struct LyapunovReport {
  bool applicable = true;
  std::vector<double> series;
  /// Smallest increment of ρ̄²C(x̄, x̄) between consecutive samples.
  double worst_increment = 0.0;
  bool passed(double tol) const { return applicable && worst_increment >= -tol; }
};

LyapunovReport lyapunov_local(const ConcentrationTrajectory& traj,
                              const LocalCompetitionModel& model);

struct BumpVerdict {
  TraitPoint x0;
  double macro = 0.0;
  bool dominated = false;
};

/// Coexisting bumps share one constraint, so every bump whose Ī(x̄⁰) is below
/// the largest is marked dominated.
std::vector<BumpVerdict> mark_dominated(const std::vector<TraitPoint>& centers,
                                        const GlobalInteractionModel& model);

}  // namespace concentra
