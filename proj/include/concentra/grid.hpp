#pragma once

#include "concentra/model.hpp"
#include "concentra/types.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace concentra {

enum class BoundaryRule { NoFlux };

std::string to_string(BoundaryRule rule);

/// Uniform cell-centred grid on a box in dimension 1 or 2. Node k on an axis sits
/// at lower + (k + 1/2) h. Nodes are stored row-major: index = i * n2 + j.
class TraitGrid {
 public:
  TraitGrid() = default;
  TraitGrid(int dimension, TraitPoint lower, TraitPoint upper, std::vector<int> points);

  int dimension() const { return dimension_; }
  int points(int axis) const { return points_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& points() const { return points_; }
  double spacing(int axis) const { return h_[static_cast<std::size_t>(axis)]; }
  double min_spacing() const;
  const TraitPoint& lower() const { return lower_; }
  const TraitPoint& upper() const { return upper_; }
  Box box() const { return {lower_, upper_}; }

  std::size_t size() const { return size_; }
  double cell_volume() const { return volume_; }
  double coord(int axis, int k) const { return lower_[axis] + (k + 0.5) * spacing(axis); }
  std::size_t index(int i, int j = 0) const {
    return dimension_ == 1 ? static_cast<std::size_t>(i)
                           : static_cast<std::size_t>(i) * static_cast<std::size_t>(points_[1]) +
                                 static_cast<std::size_t>(j);
  }
  std::array<int, 2> multi_index(std::size_t node) const;
  TraitPoint node(std::size_t index) const;
  /// Nodes whose multi-index lies within `cells` of an edge of the grid.
  bool near_boundary(std::size_t node, int cells) const;
  /// Node nearest to x (clamped to the grid).
  std::size_t nearest_node(const TraitPoint& x) const;

  bool operator==(const TraitGrid& other) const;

 private:
  int dimension_ = 1;
  TraitPoint lower_;
  TraitPoint upper_;
  std::vector<int> points_;
  std::vector<double> h_;
  std::size_t size_ = 0;
  double volume_ = 0.0;
};

TraitGrid build_grid(int dimension, const TraitPoint& lower, const TraitPoint& upper,
                     const std::vector<int>& points_per_axis);

/// Grid-sampled real function; values are finite.
struct ScalarField {
  TraitGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(TraitGrid g, std::vector<double> v);

  static ScalarField sample(const TraitGrid& grid, const PointFn& f);
};

/// Population density: a ScalarField with nonnegative values.
struct DensityField : ScalarField {
  DensityField() = default;
  DensityField(TraitGrid g, std::vector<double> v);
  explicit DensityField(ScalarField f);

  static DensityField sample(const TraitGrid& grid, const PointFn& f);
};

/// Conservative second-order stencil of ∇·(b∇f) with face-averaged b and
/// no-flux mirror boundaries. With b ≡ 1 it is the 3-point / 5-point Laplacian.
class DiffusionStencil {
 public:
  explicit DiffusionStencil(const TraitGrid& grid);
  DiffusionStencil(const TraitGrid& grid, const DiffusionCoefficient& b);

  const TraitGrid& grid() const { return grid_; }
  void apply(std::span<const double> in, std::span<double> out) const;
  /// Weight of the face between node k and k+1 on `axis` at transverse index t,
  /// already divided by h².
  double face(int axis, std::size_t face_index) const { return faces_[axis][face_index]; }
  std::size_t face_index(int axis, int i, int j) const;

 private:
  TraitGrid grid_;
  std::array<std::vector<double>, 2> faces_;
};

ScalarField laplacian(const ScalarField& field, BoundaryRule bc = BoundaryRule::NoFlux);
ScalarField div_b_grad(const ScalarField& field, const DiffusionCoefficient& b,
                       BoundaryRule bc = BoundaryRule::NoFlux);

/// Midpoint quadrature Σ w(x_i) f_i ∏h.
double integrate(const ScalarField& field);
double integrate(const ScalarField& field, const PointFn& weight);

/// x ↦ Σ_j C(x, y_j) n_j ∏h by direct summation.
ScalarField convolve_kernel(const DensityField& density, const KernelFn& kernel);
/// Product-form kernel: factor_x(x) · Σ_j factor_y(y_j) n_j ∏h.
ScalarField convolve_kernel(const DensityField& density, const SeparableKernel& kernel);
/// Uses the separable fast path when the model declares one.
ScalarField convolve_kernel(const DensityField& density, const LocalCompetitionModel& model);

/// Mass carried by nodes within `cells` of the boundary.
double boundary_mass(const DensityField& density, int cells = 2);

/// Snapshot CSV: header line then `x1[,x2],value` per node, 17 significant digits.
void write_field_csv(std::ostream& os, const ScalarField& field);
ScalarField read_field_csv(std::istream& is);

}  // namespace concentra
