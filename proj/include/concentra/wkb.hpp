#pragma once

#include "concentra/grid.hpp"
#include "concentra/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace concentra {

/// Densities below this are clamped before taking the logarithm.
inline constexpr double kDensityFloor = 1e-280;
/// Nodes with u >= u_max - kResolvedWindow * eps enter the regularity statistics.
inline constexpr double kResolvedWindow = 40.0;

/// u = eps ln n on the grid of the density it came from.
struct WkbField {
  TraitGrid grid;
  std::vector<double> values;
  /// Nodes whose density sat at or below the floor.
  std::vector<bool> floored;
  double epsilon = 1.0;

  double max_value() const;
  /// Non-floored nodes within kResolvedWindow * eps of the maximum.
  std::vector<std::size_t> resolved_nodes() const;
};

WkbField to_wkb(const DensityField& density, double epsilon);
/// n = exp(u / eps). Throws RangeError when u / eps > 700.
DensityField from_wkb(const WkbField& u, double epsilon);

struct LocalMax {
  TraitPoint point;
  double value = 0.0;
  std::size_t node = 0;
  /// The grid argmax sits on the outermost ring; no refinement was attempted.
  bool on_boundary = false;
};

/// Grid maxima refined by a least-squares quadratic fit on the 3x3 (3-point)
/// neighbourhood. With `multi`, every local maximum above max - eps ln 1e6 is
/// returned in decreasing order of value; otherwise only the global one.
std::vector<LocalMax> locate_max(const WkbField& u, bool multi);

/// Hessian of the quadratic fit at the node nearest x_bar. Throws BoundaryError
/// within two cells of the boundary.
TraitMatrix hessian_at(const WkbField& u, const TraitPoint& x_bar);

/// Least-squares quadratic on the neighbourhood of an interior node.
struct QuadraticFit {
  TraitPoint center;
  double value = 0.0;
  TraitPoint gradient;
  TraitMatrix hessian;
};
QuadraticFit fit_quadratic(const WkbField& u, std::size_t node);

struct RegularityReport {
  double time = 0.0;
  std::size_t resolved_nodes = 0;

  bool envelope_passed = true;
  /// Smallest slack of either quadratic envelope over the resolved nodes.
  double envelope_margin = 0.0;
  std::optional<TraitPoint> envelope_worst;

  bool hessian_passed = true;
  double hessian_min_eig = 0.0;
  double hessian_max_eig = 0.0;
  double hessian_lower_bound = 0.0;
  double hessian_upper_bound = 0.0;
  std::optional<TraitPoint> hessian_worst;

  /// Largest directional third difference, axes and diagonals.
  double third_derivative_max = 0.0;

  bool gradient_passed = true;
  /// Measured max |∇u| / (1 + |x - origin|).
  double gradient_constant = 0.0;

  bool all_passed() const { return envelope_passed && hessian_passed && gradient_passed; }
};

/// Envelope -L̲₀ - L̲₁|x|² - 2dεL̲₁t <= u <= L̄₀ - L̄₁|x|² + (K̄₀ + 2dεL̄₁)t,
/// Hessian eigenvalues in [-2L̲₁, -2L̄₁], third differences, and the gradient
/// growth |∇u| <= C_grad_u (1 + |x|) (skipped when C_grad_u = 0). `x` is measured
/// from constants.origin when set.
RegularityReport regularity_monitor(const WkbField& u, const AssumptionConstants& constants,
                                    double time);

nlohmann::json to_json(const RegularityReport& report);

}  // namespace concentra
