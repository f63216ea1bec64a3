#include "concentra/grid.hpp"

#include "concentra/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace concentra {

std::string to_string(BoundaryRule rule) {
  switch (rule) {
    case BoundaryRule::NoFlux:
      return "no_flux";
  }
  return "unknown";
}

TraitGrid::TraitGrid(int dimension, TraitPoint lower, TraitPoint upper, std::vector<int> points)
    : dimension_(dimension), lower_(std::move(lower)), upper_(std::move(upper)),
      points_(std::move(points)) {
  if (dimension_ != 1 && dimension_ != 2)
    throw GridError("grid dimension must be 1 or 2, got " + std::to_string(dimension_));
  if (lower_.size() != dimension_ || upper_.size() != dimension_)
    throw GridError("grid bounds must have one entry per axis");
  if (points_.size() == 1 && dimension_ == 2) points_.push_back(points_[0]);
  if (static_cast<int>(points_.size()) != dimension_)
    throw GridError("points_per_axis must have one entry per axis");
  size_ = 1;
  volume_ = 1.0;
  for (int a = 0; a < dimension_; ++a) {
    if (!(upper_[a] > lower_[a]))
      throw GridError("degenerate box on axis " + std::to_string(a) + ": upper must exceed lower");
    if (points_[static_cast<std::size_t>(a)] < 8)
      throw GridError("points_per_axis must be at least 8 on axis " + std::to_string(a));
    const double h = (upper_[a] - lower_[a]) / points_[static_cast<std::size_t>(a)];
    h_.push_back(h);
    size_ *= static_cast<std::size_t>(points_[static_cast<std::size_t>(a)]);
    volume_ *= h;
  }
}

double TraitGrid::min_spacing() const { return *std::min_element(h_.begin(), h_.end()); }

std::array<int, 2> TraitGrid::multi_index(std::size_t node) const {
  if (dimension_ == 1) return {static_cast<int>(node), 0};
  const auto n2 = static_cast<std::size_t>(points_[1]);
  return {static_cast<int>(node / n2), static_cast<int>(node % n2)};
}

TraitPoint TraitGrid::node(std::size_t index) const {
  const auto [i, j] = multi_index(index);
  if (dimension_ == 1) return make_point(coord(0, i));
  return make_point(coord(0, i), coord(1, j));
}

bool TraitGrid::near_boundary(std::size_t node, int cells) const {
  const auto mi = multi_index(node);
  for (int a = 0; a < dimension_; ++a) {
    const int k = mi[static_cast<std::size_t>(a)];
    if (k < cells || k >= points(a) - cells) return true;
  }
  return false;
}

std::size_t TraitGrid::nearest_node(const TraitPoint& x) const {
  std::array<int, 2> k{0, 0};
  for (int a = 0; a < dimension_; ++a) {
    const double s = (x[a] - lower_[a]) / spacing(a) - 0.5;
    k[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::lround(s)), 0, points(a) - 1);
  }
  return index(k[0], k[1]);
}

bool TraitGrid::operator==(const TraitGrid& other) const {
  return dimension_ == other.dimension_ && points_ == other.points_ && lower_ == other.lower_ &&
         upper_ == other.upper_;
}

TraitGrid build_grid(int dimension, const TraitPoint& lower, const TraitPoint& upper,
                     const std::vector<int>& points_per_axis) {
  return TraitGrid(dimension, lower, upper, points_per_axis);
}

ScalarField::ScalarField(TraitGrid g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size())
    throw GridError("field has " + std::to_string(values.size()) + " values for a grid of " +
                    std::to_string(grid.size()) + " nodes");
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!std::isfinite(values[k]))
      throw GridError("field value at node " + std::to_string(k) + " is not finite");
}

ScalarField ScalarField::sample(const TraitGrid& grid, const PointFn& f) {
  std::vector<double> v(grid.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(grid.node(k));
  return ScalarField(grid, std::move(v));
}

DensityField::DensityField(TraitGrid g, std::vector<double> v)
    : DensityField(ScalarField(std::move(g), std::move(v))) {}

DensityField::DensityField(ScalarField f) : ScalarField(std::move(f)) {
  for (std::size_t k = 0; k < values.size(); ++k)
    if (values[k] < 0.0) throw GridError("density is negative at node " + std::to_string(k));
}

DensityField DensityField::sample(const TraitGrid& grid, const PointFn& f) {
  return DensityField(ScalarField::sample(grid, f));
}

// ---------------------------------------------------------------------------

DiffusionStencil::DiffusionStencil(const TraitGrid& grid) : grid_(grid) {
  const int d = grid.dimension();
  const int n1 = grid.points(0);
  const int n2 = d == 2 ? grid.points(1) : 1;
  for (int a = 0; a < d; ++a) {
    const double w = 1.0 / (grid.spacing(a) * grid.spacing(a));
    const std::size_t count = a == 0 ? static_cast<std::size_t>(n1 - 1) * n2
                                     : static_cast<std::size_t>(n1) * (n2 - 1);
    faces_[a].assign(count, w);
  }
}

DiffusionStencil::DiffusionStencil(const TraitGrid& grid, const DiffusionCoefficient& b)
    : DiffusionStencil(grid) {
  if (b.constant) return;
  const int d = grid.dimension();
  const int n1 = grid.points(0);
  const int n2 = d == 2 ? grid.points(1) : 1;
  std::vector<double> bn(grid.size());
  for (std::size_t k = 0; k < bn.size(); ++k) {
    bn[k] = b.value(grid.node(k));
    if (!(bn[k] > 0.0))
      throw DomainError("diffusion coefficient is not positive at " + format_point(grid.node(k)));
  }
  for (int a = 0; a < d; ++a) {
    const double w = 1.0 / (grid.spacing(a) * grid.spacing(a));
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        if (a == 0 && i + 1 < n1)
          faces_[0][face_index(0, i, j)] = 0.5 * (bn[grid.index(i, j)] + bn[grid.index(i + 1, j)]) * w;
        if (a == 1 && j + 1 < n2)
          faces_[1][face_index(1, i, j)] = 0.5 * (bn[grid.index(i, j)] + bn[grid.index(i, j + 1)]) * w;
      }
  }
}

std::size_t DiffusionStencil::face_index(int axis, int i, int j) const {
  const int n2 = grid_.dimension() == 2 ? grid_.points(1) : 1;
  if (axis == 0) return static_cast<std::size_t>(i) * n2 + j;
  return static_cast<std::size_t>(i) * (n2 - 1) + j;
}

void DiffusionStencil::apply(std::span<const double> in, std::span<double> out) const {
  const int d = grid_.dimension();
  const int n1 = grid_.points(0);
  const int n2 = d == 2 ? grid_.points(1) : 1;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      const std::size_t k = grid_.index(i, j);
      const double f = in[k];
      double acc = 0.0;
      if (i + 1 < n1) acc += faces_[0][face_index(0, i, j)] * (in[grid_.index(i + 1, j)] - f);
      if (i > 0) acc -= faces_[0][face_index(0, i - 1, j)] * (f - in[grid_.index(i - 1, j)]);
      if (d == 2) {
        if (j + 1 < n2) acc += faces_[1][face_index(1, i, j)] * (in[grid_.index(i, j + 1)] - f);
        if (j > 0) acc -= faces_[1][face_index(1, i, j - 1)] * (f - in[grid_.index(i, j - 1)]);
      }
      out[k] = acc;
    }
  }
}

ScalarField laplacian(const ScalarField& field, BoundaryRule) {
  DiffusionStencil stencil(field.grid);
  std::vector<double> out(field.values.size());
  stencil.apply(field.values, out);
  return ScalarField(field.grid, std::move(out));
}

ScalarField div_b_grad(const ScalarField& field, const DiffusionCoefficient& b, BoundaryRule) {
  DiffusionStencil stencil(field.grid, b);
  std::vector<double> out(field.values.size());
  stencil.apply(field.values, out);
  return ScalarField(field.grid, std::move(out));
}

double integrate(const ScalarField& field) {
  double s = 0.0;
  for (double v : field.values) s += v;
  return s * field.grid.cell_volume();
}

double integrate(const ScalarField& field, const PointFn& weight) {
  double s = 0.0;
  for (std::size_t k = 0; k < field.values.size(); ++k)
    s += weight(field.grid.node(k)) * field.values[k];
  return s * field.grid.cell_volume();
}

ScalarField convolve_kernel(const DensityField& density, const KernelFn& kernel) {
  const auto& g = density.grid;
  const std::size_t n = g.size();
  std::vector<TraitPoint> nodes(n);
  for (std::size_t k = 0; k < n; ++k) nodes[k] = g.node(k);
  std::vector<double> out(n, 0.0);
  const double vol = g.cell_volume();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (density.values[j] != 0.0) s += kernel(nodes[i], nodes[j]) * density.values[j];
    out[i] = s * vol;
  }
  return ScalarField(g, std::move(out));
}

ScalarField convolve_kernel(const DensityField& density, const SeparableKernel& kernel) {
  const double I = integrate(density, kernel.factor_y);
  std::vector<double> out(density.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernel.factor_x(density.grid.node(i)) * I;
  return ScalarField(density.grid, std::move(out));
}

ScalarField convolve_kernel(const DensityField& density, const LocalCompetitionModel& model) {
  if (model.separable) return convolve_kernel(density, *model.separable);
  return convolve_kernel(density, model.kernel);
}

double boundary_mass(const DensityField& density, int cells) {
  double s = 0.0;
  for (std::size_t k = 0; k < density.values.size(); ++k)
    if (density.grid.near_boundary(k, cells)) s += density.values[k];
  return s * density.grid.cell_volume();
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

void write_field_csv(std::ostream& os, const ScalarField& field) {
  const auto& g = field.grid;
  os << "# grid dim=" << g.dimension() << " n=" << g.points(0);
  if (g.dimension() == 2) os << ',' << g.points(1);
  os << " lower=" << fmt17(g.lower()[0]);
  if (g.dimension() == 2) os << ',' << fmt17(g.lower()[1]);
  os << " upper=" << fmt17(g.upper()[0]);
  if (g.dimension() == 2) os << ',' << fmt17(g.upper()[1]);
  os << '\n';
  for (std::size_t k = 0; k < field.values.size(); ++k) {
    const TraitPoint x = g.node(k);
    os << fmt17(x[0]);
    if (g.dimension() == 2) os << ',' << fmt17(x[1]);
    os << ',' << fmt17(field.values[k]) << '\n';
  }
}

ScalarField read_field_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# grid", 0) != 0)
    throw GridError("snapshot is missing its '# grid' header");
  int dim = 0;
  std::vector<double> n, lower, upper;
  std::stringstream hs(header.substr(6));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "dim") dim = std::stoi(val);
    else if (key == "n") n = parse_list(val);
    else if (key == "lower") lower = parse_list(val);
    else if (key == "upper") upper = parse_list(val);
  }
  if (dim < 1 || dim > 2 || static_cast<int>(n.size()) != dim ||
      static_cast<int>(lower.size()) != dim || static_cast<int>(upper.size()) != dim)
    throw GridError("malformed snapshot header: " + header);
  TraitPoint lo(dim), hi(dim);
  std::vector<int> pts;
  for (int a = 0; a < dim; ++a) {
    lo[a] = lower[static_cast<std::size_t>(a)];
    hi[a] = upper[static_cast<std::size_t>(a)];
    pts.push_back(static_cast<int>(n[static_cast<std::size_t>(a)]));
  }
  TraitGrid grid(dim, lo, hi, pts);
  std::vector<double> values;
  values.reserve(grid.size());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find_last_of(',');
    if (comma == std::string::npos) throw GridError("malformed snapshot row: " + line);
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  return ScalarField(std::move(grid), std::move(values));
}

}  // namespace concentra
