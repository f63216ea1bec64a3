#include "concentra/wkb.hpp"

#include "concentra/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace concentra {

double WkbField::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!floored[k]) m = std::max(m, values[k]);
  if (!std::isfinite(m)) m = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  return m;
}

std::vector<std::size_t> WkbField::resolved_nodes() const {
  const double cut = max_value() - kResolvedWindow * epsilon;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!floored[k] && values[k] >= cut) out.push_back(k);
  return out;
}

WkbField to_wkb(const DensityField& density, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  WkbField u;
  u.grid = density.grid;
  u.epsilon = epsilon;
  u.values.resize(density.values.size());
  u.floored.resize(density.values.size());
  for (std::size_t k = 0; k < density.values.size(); ++k) {
    const double n = density.values[k];
    u.floored[k] = !(n > kDensityFloor);
    u.values[k] = epsilon * std::log(u.floored[k] ? kDensityFloor : n);
  }
  return u;
}

DensityField from_wkb(const WkbField& u, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  std::vector<double> n(u.values.size());
  for (std::size_t k = 0; k < n.size(); ++k) {
    const double s = u.values[k] / epsilon;
    if (s > 700.0)
      throw RangeError("u/eps = " + std::to_string(s) + " overflows at " + format_point(u.grid.node(k)),
                       k);
    n[k] = std::exp(s);
  }
  return DensityField(u.grid, std::move(n));
}

// ---------------------------------------------------------------------------

QuadraticFit fit_quadratic(const WkbField& u, std::size_t node) {
  const auto& g = u.grid;
  const auto [i, j] = g.multi_index(node);
  if (g.near_boundary(node, 1))
    throw BoundaryError("quadratic fit needs a full neighbourhood; node at " +
                        format_point(g.node(node)) + " touches the boundary");
  const auto& v = u.values;
  QuadraticFit f;
  f.center = g.node(node);
  if (g.dimension() == 1) {
    const double h = g.spacing(0);
    const double um = v[g.index(i - 1)], u0 = v[node], up = v[g.index(i + 1)];
    f.value = u0;
    f.gradient = make_point((up - um) / (2.0 * h));
    f.hessian = TraitMatrix::Constant(1, 1, (up - 2.0 * u0 + um) / (h * h));
    return f;
  }
  const double hx = g.spacing(0), hy = g.spacing(1);
  auto at = [&](int di, int dj) { return v[g.index(i + di, j + dj)]; };
  double gx = 0.0, gy = 0.0, dxx = 0.0, dyy = 0.0, mean = 0.0;
  for (int t = -1; t <= 1; ++t) {
    gx += at(1, t) - at(-1, t);
    gy += at(t, 1) - at(t, -1);
    dxx += at(1, t) - 2.0 * at(0, t) + at(-1, t);
    dyy += at(t, 1) - 2.0 * at(t, 0) + at(t, -1);
    for (int s = -1; s <= 1; ++s) mean += at(s, t);
  }
  mean /= 9.0;
  const double dxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / 4.0;
  // Coefficients of s² and t² in lattice units are dxx/6 and dyy/6.
  f.value = mean - (2.0 / 3.0) * (dxx / 6.0 + dyy / 6.0);
  f.gradient = make_point(gx / (6.0 * hx), gy / (6.0 * hy));
  f.hessian.resize(2, 2);
  f.hessian(0, 0) = dxx / (3.0 * hx * hx);
  f.hessian(1, 1) = dyy / (3.0 * hy * hy);
  f.hessian(0, 1) = f.hessian(1, 0) = dxy / (hx * hy);
  return f;
}

namespace {

bool is_local_max(const WkbField& u, std::size_t node) {
  const auto& g = u.grid;
  const auto [i, j] = g.multi_index(node);
  const double c = u.values[node];
  const int d = g.dimension();
  for (int di = -1; di <= 1; ++di)
    for (int dj = (d == 2 ? -1 : 0); dj <= (d == 2 ? 1 : 0); ++dj) {
      if (di == 0 && dj == 0) continue;
      const int a = i + di, b = j + dj;
      if (a < 0 || a >= g.points(0) || (d == 2 && (b < 0 || b >= g.points(1)))) continue;
      const std::size_t k = g.index(a, b);
      // Plateaus are broken in favour of the lowest index.
      if (u.values[k] > c || (u.values[k] == c && k < node)) return false;
    }
  return true;
}

LocalMax refine(const WkbField& u, std::size_t node) {
  const auto& g = u.grid;
  LocalMax m;
  m.node = node;
  m.point = g.node(node);
  m.value = u.values[node];
  if (g.near_boundary(node, 1)) {
    m.on_boundary = true;
    return m;
  }
  const QuadraticFit f = fit_quadratic(u, node);
  Eigen::SelfAdjointEigenSolver<TraitMatrix> es(f.hessian, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().maxCoeff() < 0.0)) return m;
  TraitPoint delta = f.hessian.ldlt().solve(-f.gradient);
  for (int a = 0; a < g.dimension(); ++a)
    delta[a] = std::clamp(delta[a], -g.spacing(a), g.spacing(a));
  m.point = f.center + delta;
  m.value = f.value + f.gradient.dot(delta) + 0.5 * delta.dot(f.hessian * delta);
  return m;
}

}  // namespace

std::vector<LocalMax> locate_max(const WkbField& u, bool multi) {
  std::vector<LocalMax> out;
  if (u.values.empty()) return out;
  std::size_t best = 0;
  for (std::size_t k = 1; k < u.values.size(); ++k)
    if (u.values[k] > u.values[best]) best = k;
  if (!multi) {
    out.push_back(refine(u, best));
    return out;
  }
  const double cut = u.values[best] - u.epsilon * std::log(1e6);
  for (std::size_t k = 0; k < u.values.size(); ++k)
    if (!u.floored[k] && u.values[k] >= cut && is_local_max(u, k)) out.push_back(refine(u, k));
  if (out.empty()) out.push_back(refine(u, best));
  std::stable_sort(out.begin(), out.end(),
                   [](const LocalMax& a, const LocalMax& b) { return a.value > b.value; });
  return out;
}

TraitMatrix hessian_at(const WkbField& u, const TraitPoint& x_bar) {
  const std::size_t node = u.grid.nearest_node(x_bar);
  if (u.grid.near_boundary(node, 2))
    throw BoundaryError("Hessian requested within two cells of the boundary at " +
                        format_point(x_bar));
  return fit_quadratic(u, node).hessian;
}

// ---------------------------------------------------------------------------

RegularityReport regularity_monitor(const WkbField& u, const AssumptionConstants& c, double time) {
  const auto& g = u.grid;
  const int d = g.dimension();
  const TraitPoint origin =
      c.origin.size() == d ? c.origin : TraitPoint(TraitPoint::Zero(d));
  const double eps = u.epsilon;

  RegularityReport r;
  r.time = time;
  r.hessian_lower_bound = -2.0 * c.L_under_1;
  r.hessian_upper_bound = -2.0 * c.L_bar_1;
  r.hessian_min_eig = std::numeric_limits<double>::infinity();
  r.hessian_max_eig = -std::numeric_limits<double>::infinity();
  r.envelope_margin = std::numeric_limits<double>::infinity();

  const double upper_slack = (c.K_bar_0 + 2.0 * d * eps * c.L_bar_1) * time;
  const double lower_slack = 2.0 * d * eps * c.L_under_1 * time;
  const double tol = 1e-9;

  const auto nodes = u.resolved_nodes();
  r.resolved_nodes = nodes.size();
  double worst_hess = 0.0;
  for (std::size_t k : nodes) {
    const TraitPoint x = g.node(k);
    const double r2 = (x - origin).squaredNorm();
    const double hi = c.L_bar_0 - c.L_bar_1 * r2 + upper_slack;
    const double lo = -c.L_under_0 - c.L_under_1 * r2 - lower_slack;
    const double margin = std::min(hi - u.values[k], u.values[k] - lo);
    if (margin < r.envelope_margin) {
      r.envelope_margin = margin;
      r.envelope_worst = x;
    }
    if (g.near_boundary(k, 1)) continue;
    const QuadraticFit f = fit_quadratic(u, k);
    Eigen::SelfAdjointEigenSolver<TraitMatrix> es(f.hessian, Eigen::EigenvaluesOnly);
    const double lo_eig = es.eigenvalues().minCoeff();
    const double hi_eig = es.eigenvalues().maxCoeff();
    r.hessian_min_eig = std::min(r.hessian_min_eig, lo_eig);
    r.hessian_max_eig = std::max(r.hessian_max_eig, hi_eig);
    const double viol = std::max(r.hessian_lower_bound - lo_eig, hi_eig - r.hessian_upper_bound);
    if (viol > worst_hess) {
      worst_hess = viol;
      r.hessian_worst = x;
    }
    r.gradient_constant =
        std::max(r.gradient_constant, f.gradient.norm() / (1.0 + std::sqrt(r2)));

    if (g.near_boundary(k, 2)) continue;
    const auto [i, j] = g.multi_index(k);
    auto third = [&](int di, int dj, double step) {
      const double up2 = u.values[g.index(i + 2 * di, j + 2 * dj)];
      const double up1 = u.values[g.index(i + di, j + dj)];
      const double um1 = u.values[g.index(i - di, j - dj)];
      const double um2 = u.values[g.index(i - 2 * di, j - 2 * dj)];
      return std::abs((up2 - 2.0 * up1 + 2.0 * um1 - um2) / (2.0 * step * step * step));
    };
    double m1 = third(1, 0, g.spacing(0));
    if (d == 2) {
      const double diag = std::hypot(g.spacing(0), g.spacing(1));
      m1 = std::max({m1, third(0, 1, g.spacing(1)), third(1, 1, diag), third(1, -1, diag)});
    }
    r.third_derivative_max = std::max(r.third_derivative_max, m1);
  }
  if (nodes.empty()) r.envelope_margin = 0.0;
  r.envelope_passed = r.envelope_margin >= -tol;
  if (!std::isfinite(r.hessian_min_eig)) {
    r.hessian_min_eig = r.hessian_max_eig = 0.0;
  } else {
    const double scale = 1.0 + std::max(std::abs(r.hessian_lower_bound), std::abs(r.hessian_upper_bound));
    r.hessian_passed = worst_hess <= 1e-8 * scale;
  }
  r.gradient_passed = c.C_grad_u <= 0.0 || r.gradient_constant <= c.C_grad_u * (1.0 + 1e-12);
  return r;
}

nlohmann::json to_json(const RegularityReport& r) {
  auto pt = [](const std::optional<TraitPoint>& p) -> nlohmann::json {
    if (!p) return nullptr;
    return std::vector<double>(p->data(), p->data() + p->size());
  };
  return {
      {"time", r.time},
      {"resolved_nodes", r.resolved_nodes},
      {"resolved_window", kResolvedWindow},
      {"envelope", {{"passed", r.envelope_passed}, {"margin", r.envelope_margin},
                    {"worst_point", pt(r.envelope_worst)}}},
      {"hessian", {{"passed", r.hessian_passed}, {"min_eigenvalue", r.hessian_min_eig},
                   {"max_eigenvalue", r.hessian_max_eig}, {"lower_bound", r.hessian_lower_bound},
                   {"upper_bound", r.hessian_upper_bound}, {"worst_point", pt(r.hessian_worst)}}},
      {"third_derivative_max", r.third_derivative_max},
      {"gradient", {{"passed", r.gradient_passed}, {"measured_constant", r.gradient_constant}}},
  };
}

}  // namespace concentra
