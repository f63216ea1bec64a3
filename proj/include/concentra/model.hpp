#pragma once

#include "concentra/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace concentra {

/// Absolute tolerance on |R(x, I)| when inverting the constraint R(x, I) = 0.
inline constexpr double kRootTol = 1e-12;

/// Fraction by which the bracket for I extends above the nominal I_M.
inline constexpr double kBracketMargin = 0.1;

using RateFn = std::function<double(const TraitPoint&, double)>;
using RateGradFn = std::function<TraitPoint(const TraitPoint&, double)>;
using RateHessFn = std::function<TraitMatrix(const TraitPoint&, double)>;
using PointFn = std::function<double(const TraitPoint&)>;
using PointGradFn = std::function<TraitPoint(const TraitPoint&)>;
using PointHessFn = std::function<TraitMatrix(const TraitPoint&)>;
using KernelFn = std::function<double(const TraitPoint&, const TraitPoint&)>;
using KernelGradFn = std::function<TraitPoint(const TraitPoint&, const TraitPoint&)>;
using KernelHessFn = std::function<TraitMatrix(const TraitPoint&, const TraitPoint&)>;

/// Growth law R(x, I) driven by the single weighted integral I = ∫ψ n.
struct GlobalInteractionModel {
  std::string name;
  int dimension = 2;
  RateFn rate;
  RateGradFn grad_x_rate;
  RateHessFn hess_x_rate;
  RateFn d_rate_dI;
  PointFn weight;
  /// I_M: the largest value the constraint root takes on the computational box.
  double i_max = 1.0;
};

/// Product form C(x, y) = factor_x(x) * factor_y(y); enables the O(N) convolution.
struct SeparableKernel {
  PointFn factor_x;
  PointFn factor_y;
};

/// Growth law r(x) - ∫C(x, y) n(y) dy.
struct LocalCompetitionModel {
  std::string name;
  int dimension = 2;
  PointFn intrinsic_rate;
  PointGradFn grad_intrinsic;
  PointHessFn hess_intrinsic;
  KernelFn kernel;
  KernelGradFn grad_x_kernel;
  KernelGradFn grad_y_kernel;
  KernelHessFn hess_xx_kernel;
  bool symmetric = false;
  std::optional<SeparableKernel> separable;
};

/// Mutation coefficient b(x) of the divergence-form diffusion.
struct DiffusionCoefficient {
  std::string name = "constant";
  PointFn value;
  PointGradFn grad;
  PointFn hess_trace;
  double third_bound = 0.0;
  bool constant = true;
};

using GrowthModel = std::variant<GlobalInteractionModel, LocalCompetitionModel>;

DiffusionCoefficient unit_diffusion(int dimension);

/// Constants of the concavity framework. `origin` is the point from which |x| is
/// measured in the quadratic bounds.
struct AssumptionConstants {
  TraitPoint origin;
  double I_M = 1.0;
  double I_0 = 0.0;
  double rho_M = 1.0;
  double K_bar_0 = 0.0;
  double K_bar_1 = 0.0;
  double K_under_1 = 0.0;
  double K_bar_2 = 0.0;
  double K_under_2 = 0.0;
  double K_3 = 0.0;
  double L_bar_0 = 0.0;
  double L_bar_1 = 0.0;
  double L_under_0 = 0.0;
  double L_under_1 = 0.0;
  double C_grad_u = 0.0;
  double K_bar_b = 0.0;
  double K_under_b = 0.0;
  double K_bar_1_prime = 0.0;
  double K_under_1_prime = 0.0;
  double K_bar_0_prime = 0.0;
};

/// Initial data summary used by the initial-data and compatibility checks.
struct InitialProfile {
  PointFn u0;
  PointHessFn hess_u0;
  TraitPoint x0;
  double initial_I = 0.0;
  double initial_mass = 0.0;
};

struct AssumptionItem {
  std::string name;
  bool passed = true;
  /// Signed slack of the inequality at the worst sample (negative means violated).
  double margin = 0.0;
  std::optional<TraitPoint> worst_point;
  std::string detail;
  /// Items that belong to the concavity framework generate warnings when violated.
  bool concavity = false;
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;
  std::vector<std::string> warnings;

  bool all_passed() const;
  const AssumptionItem* find(const std::string& name) const;
};

double eval_growth(const GlobalInteractionModel& model, const TraitPoint& x, double I);
double eval_growth(const LocalCompetitionModel& model, const TraitPoint& x,
                   double competition);

AssumptionReport check_assumptions(const GlobalInteractionModel& model,
                                   const AssumptionConstants& constants, const Box& box,
                                   int samples = 256,
                                   const InitialProfile* initial = nullptr);
AssumptionReport check_assumptions(const GlobalInteractionModel& model,
                                   const DiffusionCoefficient& diffusion,
                                   const AssumptionConstants& constants, const Box& box,
                                   int samples = 256,
                                   const InitialProfile* initial = nullptr);
AssumptionReport check_assumptions(const LocalCompetitionModel& model,
                                   const AssumptionConstants& constants, const Box& box,
                                   int samples = 256,
                                   const InitialProfile* initial = nullptr);

/// Compatibility inequality 4 L̄₁² ≤ K̄₁ ≤ K̲₁ ≤ 4 L̲₁² on the constants alone.
AssumptionItem check_compatibility(double L_bar_1, double K_bar_1, double K_under_1,
                                   double L_under_1, const std::string& name);

/// Unique root Ī of I ↦ R(x, I) in [0, (1 + kBracketMargin) I_M].
double invert_constraint(const GlobalInteractionModel& model, const TraitPoint& x);

double steady_state_weight(const GlobalInteractionModel& model, const TraitPoint& y);
double steady_state_weight(const LocalCompetitionModel& model, const TraitPoint& y);

/// Φ(x) = ln r(x) - ln C(x, x), defined on {r > 0}.
double phi_potential(const LocalCompetitionModel& model, const TraitPoint& x);

/// Gradient of x ↦ C(x, x).
TraitPoint kernel_diagonal_gradient(const LocalCompetitionModel& model, const TraitPoint& x);

/// Finite-difference step used by the derivative fallback.
double fd_step(const TraitPoint& x);

/// Fills every missing derivative of `model` with central finite differences.
GlobalInteractionModel with_fd_derivatives(GlobalInteractionModel model);
LocalCompetitionModel with_fd_derivatives(LocalCompetitionModel model);

/// Samples of the box on a uniform lattice including its corners.
std::vector<TraitPoint> sample_box(const Box& box, int samples_per_axis);

}  // namespace concentra
