#include "concentra/model.hpp"

#include "concentra/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace concentra {

std::string format_point(const TraitPoint& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ')';
  return os.str();
}

DiffusionCoefficient unit_diffusion(int dimension) {
  DiffusionCoefficient b;
  b.name = "constant";
  b.value = [](const TraitPoint&) { return 1.0; };
  b.grad = [dimension](const TraitPoint&) { return TraitPoint(TraitPoint::Zero(dimension)); };
  b.hess_trace = [](const TraitPoint&) { return 0.0; };
  b.third_bound = 0.0;
  b.constant = true;
  return b;
}

bool AssumptionReport::all_passed() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
}

const AssumptionItem* AssumptionReport::find(const std::string& name) const {
  for (const auto& item : items)
    if (item.name == name) return &item;
  return nullptr;
}

double eval_growth(const GlobalInteractionModel& model, const TraitPoint& x, double I) {
  const double value = model.rate(x, I);
  if (!std::isfinite(value))
    throw ModelEvaluationError("growth rate '" + model.name + "' is not finite at x=" +
                               format_point(x) + ", I=" + std::to_string(I));
  return value;
}

double eval_growth(const LocalCompetitionModel& model, const TraitPoint& x,
                   double competition) {
  const double value = model.intrinsic_rate(x) - competition;
  if (!std::isfinite(value))
    throw ModelEvaluationError("growth rate '" + model.name + "' is not finite at x=" +
                               format_point(x));
  return value;
}

std::vector<TraitPoint> sample_box(const Box& box, int samples_per_axis) {
  const int d = box.dimension();
  const int n = std::max(samples_per_axis, 2);
  std::vector<TraitPoint> out;
  auto coord = [&](int axis, int k) {
    return box.lower[axis] + (box.upper[axis] - box.lower[axis]) * k / (n - 1);
  };
  if (d == 1) {
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(make_point(coord(0, i)));
  } else {
    out.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.push_back(make_point(coord(0, i), coord(1, j)));
  }
  return out;
}

namespace {

// Tracks the worst (smallest) slack of an inequality over samples.
struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  TraitPoint point;

  void update(double m, const TraitPoint& x) {
    if (m < margin) {
      margin = m;
      point = x;
    }
  }
};

// Sampled inequalities may be tight at the sampled optimum; allow rounding.
constexpr double kCheckTol = 1e-9;

AssumptionItem make_item(const std::string& name, const Worst& w, bool concavity,
                         const std::string& detail = {}) {
  AssumptionItem item;
  item.name = name;
  item.margin = w.margin;
  item.passed = w.margin >= -kCheckTol;
  if (w.point.size() > 0) item.worst_point = w.point;
  item.detail = detail;
  item.concavity = concavity;
  return item;
}

std::pair<double, double> eigen_range(const TraitMatrix& m) {
  Eigen::SelfAdjointEigenSolver<TraitMatrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

std::vector<double> sample_levels(double I_max, int count = 9) {
  std::vector<double> levels;
  for (int k = 0; k < count; ++k) levels.push_back(I_max * k / (count - 1));
  return levels;
}

double sq_dist(const TraitPoint& x, const TraitPoint& origin) {
  if (origin.size() != x.size()) return x.squaredNorm();
  return (x - origin).squaredNorm();
}

void collect_warnings(AssumptionReport& report) {
  for (const auto& item : report.items)
    if (!item.passed && item.concavity)
      report.warnings.push_back("outside concave framework: " + item.name +
                                (item.detail.empty() ? "" : " (" + item.detail + ")"));
}

double laplacian_fd(const PointFn& f, const TraitPoint& x) {
  const double h = 1e-4 * (1.0 + x.norm());
  double lap = 0.0;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    TraitPoint xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    lap += (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
  }
  return lap;
}

TraitPoint gradient_fd(const PointFn& f, const TraitPoint& x) {
  const double h = fd_step(x);
  TraitPoint g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    TraitPoint xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

TraitMatrix hessian_fd(const PointFn& f, const TraitPoint& x) {
  const Eigen::Index d = x.size();
  const double h = 1e-4 * (1.0 + x.norm());
  TraitMatrix H(d, d);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < d; ++i) {
    TraitPoint xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      TraitPoint pp = x, pm = x, mp = x, mm = x;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return H;
}

// Max third differences along axes and diagonals, a boundedness estimate.
double third_difference_bound(const PointFn& f, const TraitPoint& x) {
  const double h = 1e-3 * (1.0 + x.norm());
  const Eigen::Index d = x.size();
  std::vector<TraitPoint> dirs;
  for (Eigen::Index i = 0; i < d; ++i) {
    TraitPoint e = TraitPoint::Zero(d);
    e[i] = 1.0;
    dirs.push_back(e);
  }
  if (d == 2) {
    dirs.push_back(make_point(1.0, 1.0) / std::sqrt(2.0));
    dirs.push_back(make_point(1.0, -1.0) / std::sqrt(2.0));
  }
  double best = 0.0;
  for (const auto& e : dirs) {
    const double v = (f(x + 2 * h * e) - 2 * f(x + h * e) + 2 * f(x - h * e) - f(x - 2 * h * e)) /
                     (2.0 * h * h * h);
    best = std::max(best, std::abs(v));
  }
  return best;
}

void add_compatibility(AssumptionReport& report, const AssumptionConstants& c) {
  report.items.push_back(
      check_compatibility(c.L_bar_1, c.K_bar_1, c.K_under_1, c.L_under_1, "compatibility_concavity"));
}

void add_initial_items(AssumptionReport& report, const AssumptionConstants& c,
                       const std::vector<TraitPoint>& points, const InitialProfile& init,
                       bool global) {
  if (global) {
    Worst w;
    w.update(init.initial_I - c.I_0, init.x0);
    w.update(c.I_M - init.initial_I, init.x0);
    auto item = make_item("initial_weighted_mass_window", w, false,
                          "I_0 <= I(0) < I_M with I(0)=" + std::to_string(init.initial_I));
    if (!(init.initial_I < c.I_M) || init.initial_I <= 0.0) item.passed = false;
    report.items.push_back(item);
  }
  Worst upper, lower, hu, hl;
  for (const auto& x : points) {
    const double u = init.u0(x);
    const double r2 = sq_dist(x, c.origin);
    upper.update(c.L_bar_0 - c.L_bar_1 * r2 - u, x);
    lower.update(u - (-c.L_under_0 - c.L_under_1 * r2), x);
    const auto [lo, hi] = eigen_range(init.hess_u0(x));
    hu.update(-2.0 * c.L_bar_1 - hi, x);
    hl.update(lo + 2.0 * c.L_under_1, x);
  }
  report.items.push_back(make_item("initial_quadratic_upper", upper, true));
  report.items.push_back(make_item("initial_quadratic_lower", lower, true));
  report.items.push_back(make_item("initial_hessian_upper", hu, true));
  report.items.push_back(make_item("initial_hessian_lower", hl, true));
}

}  // namespace

double fd_step(const TraitPoint& x) { return 1e-5 * (1.0 + x.norm()); }

AssumptionItem check_compatibility(double L_bar_1, double K_bar_1, double K_under_1,
                                   double L_under_1, const std::string& name) {
  const double a = K_bar_1 - 4.0 * L_bar_1 * L_bar_1;
  const double b = K_under_1 - K_bar_1;
  const double c = 4.0 * L_under_1 * L_under_1 - K_under_1;
  AssumptionItem item;
  item.name = name;
  item.margin = std::min({a, b, c});
  item.passed = item.margin >= -kCheckTol;
  item.concavity = true;
  std::ostringstream os;
  os << "4*L_bar_1^2=" << 4.0 * L_bar_1 * L_bar_1 << " K_bar_1=" << K_bar_1
     << " K_under_1=" << K_under_1 << " 4*L_under_1^2=" << 4.0 * L_under_1 * L_under_1;
  item.detail = os.str();
  return item;
}

AssumptionReport check_assumptions(const GlobalInteractionModel& model,
                                   const AssumptionConstants& c, const Box& box, int samples,
                                   const InitialProfile* initial) {
  AssumptionReport report;
  auto points = sample_box(box, samples);
  if (c.origin.size() == box.dimension() && box.contains(c.origin)) points.push_back(c.origin);
  const auto levels = sample_levels(c.I_M);

  Worst weight;
  Worst max_norm;  // -max_x R(x, I_M)
  Worst upper, lower, hess_upper, hess_lower, di_upper, di_lower, lap;
  double third = 0.0;
  for (const auto& x : points) {
    weight.update(model.weight(x), x);
    max_norm.update(-model.rate(x, c.I_M), x);
    const double r2 = sq_dist(x, c.origin);
    for (double I : levels) {
      const double R = model.rate(x, I);
      upper.update(c.K_bar_0 - c.K_bar_1 * r2 - R, x);
      lower.update(R + c.K_under_1 * r2, x);
      const auto [lo, hi] = eigen_range(model.hess_x_rate(x, I));
      hess_upper.update(-2.0 * c.K_bar_1 - hi, x);
      hess_lower.update(lo + 2.0 * c.K_under_1, x);
      const double dI = model.d_rate_dI(x, I);
      di_upper.update(-c.K_bar_2 - dI, x);
      di_lower.update(dI + c.K_under_2, x);
    }
    const PointFn psiR = [&](const TraitPoint& y) { return model.weight(y) * model.rate(y, c.I_M); };
    lap.update(laplacian_fd(psiR, x) + c.K_3, x);
    third = std::max(third, third_difference_bound(
                                [&](const TraitPoint& y) { return model.rate(y, c.I_M); }, x));
  }
  auto w_item = make_item("weight_bounds", weight, false, "psi_m = min psi on the box");
  w_item.passed = weight.margin > 0.0;
  report.items.push_back(w_item);

  {
    Worst w = max_norm;
    double at_origin = std::numeric_limits<double>::quiet_NaN();
    if (c.origin.size() == box.dimension()) {
      at_origin = model.rate(c.origin, c.I_M);
      w.update(-std::abs(at_origin), c.origin);
    }
    report.items.push_back(make_item("rate_max_normalization", w, true,
                                     "max R(x,I_M) = 0 = R(origin,I_M); R(origin,I_M)=" +
                                         std::to_string(at_origin)));
  }
  report.items.push_back(make_item("rate_quadratic_upper", upper, true));
  report.items.push_back(make_item("rate_quadratic_lower", lower, true));
  {
    auto item = make_item("rate_hessian_upper", hess_upper, true,
                          "D2R <= -2 K_bar_1 < 0");
    if (!(c.K_bar_1 > 0.0)) {
      item.passed = false;
      item.detail += "; requires K_bar_1 > 0";
    }
    report.items.push_back(item);
  }
  report.items.push_back(make_item("rate_hessian_lower", hess_lower, true));
  {
    auto item = make_item("rate_monotone_in_I", di_upper, false, "dR/dI <= -K_bar_2 < 0");
    if (!(c.K_bar_2 > 0.0)) {
      item.passed = false;
      item.detail += "; requires K_bar_2 > 0";
    }
    report.items.push_back(item);
  }
  report.items.push_back(make_item("rate_monotone_in_I_lower", di_lower, false));
  report.items.push_back(make_item("weighted_rate_laplacian", lap, false, "Laplacian(psi R) >= -K_3"));
  {
    AssumptionItem item;
    item.name = "rate_third_derivative_bounded";
    item.margin = -third;
    item.passed = std::isfinite(third);
    item.detail = "sampled max third difference " + std::to_string(third);
    report.items.push_back(item);
  }
  if (initial) add_initial_items(report, c, points, *initial, true);
  add_compatibility(report, c);
  collect_warnings(report);
  return report;
}

AssumptionReport check_assumptions(const GlobalInteractionModel& model,
                                   const DiffusionCoefficient& b,
                                   const AssumptionConstants& c, const Box& box, int samples,
                                   const InitialProfile* initial) {
  AssumptionReport report = check_assumptions(model, c, box, samples, initial);
  report.warnings.clear();
  // The diffusion-dependent compatibility replaces the constant-diffusion one.
  std::erase_if(report.items, [](const auto& i) { return i.name == "compatibility_concavity"; });

  const auto points = sample_box(box, samples);
  double b_m = std::numeric_limits<double>::infinity();
  double b_M = 0.0;
  double B1 = 0.0;
  double B2 = 0.0;
  Worst lower_b, grad_rate;
  for (const auto& x : points) {
    const double v = b.value(x);
    if (v < b_m) lower_b.update(v, x);
    b_m = std::min(b_m, v);
    b_M = std::max(b_M, v);
    const double r = 1.0 + std::sqrt(sq_dist(x, c.origin));
    B1 = std::max(B1, b.grad(x).norm() * r);
    B2 = std::max(B2, std::abs(b.hess_trace(x)) * r * r);
    const PointFn psiR = [&](const TraitPoint& y) { return model.weight(y) * model.rate(y, c.I_M); };
    grad_rate.update(b.grad(x).dot(gradient_fd(psiR, x)) + c.K_3, x);
  }
  {
    auto item = make_item("diffusion_bounds", lower_b, false);
    item.passed = b_m > 0.0;
    item.detail = "b_m=" + std::to_string(b_m) + " b_M=" + std::to_string(b_M) +
                  " B1=" + std::to_string(B1) + " B2=" + std::to_string(B2) +
                  " B3=" + std::to_string(b.third_bound);
    report.items.push_back(item);
  }
  report.items.push_back(make_item("diffusion_weighted_rate_gradient", grad_rate, false,
                                   "grad b . grad(psi R) >= -K_3"));
  const double s = B2 * c.C_grad_u * c.C_grad_u - 2.0 * c.K_bar_1;
  {
    AssumptionItem item;
    item.name = "diffusion_gradient_compatibility";
    item.margin = -s;
    item.passed = s < 0.0;
    item.concavity = true;
    item.detail = "B2*C_grad_u^2 - 2*K_bar_1 = " + std::to_string(s);
    report.items.push_back(item);
  }
  // Roots of the comparison Riccati inequalities bounding the Hessian of u.
  const double k_bar_b =
      (2 * B1 - std::sqrt(std::max(0.0, 4 * B1 * B1 - 2 * b_M * s))) / b_M;
  const double k_under_b =
      (-2 * B1 - std::sqrt(std::max(0.0, 4 * B1 * B1 +
                                             2 * b_m * (B2 * c.C_grad_u * c.C_grad_u +
                                                        2 * c.K_under_1)))) / b_m;
  if (initial) {
    Worst hu, hl;
    for (const auto& x : points) {
      const auto [lo, hi] = eigen_range(initial->hess_u0(x));
      hu.update(k_bar_b - hi, x);
      hl.update(lo - k_under_b, x);
    }
    const std::string detail =
        "K_bar_b=" + std::to_string(k_bar_b) + " K_under_b=" + std::to_string(k_under_b);
    report.items.push_back(make_item("diffusion_initial_hessian_upper", hu, true, detail));
    report.items.push_back(make_item("diffusion_initial_hessian_lower", hl, true, detail));
  }
  report.items.push_back(check_compatibility(std::sqrt(b_M) * c.L_bar_1, c.K_bar_1,
                                             c.K_under_1, std::sqrt(b_m) * c.L_under_1,
                                             "diffusion_compatibility"));
  collect_warnings(report);
  return report;
}

AssumptionReport check_assumptions(const LocalCompetitionModel& model,
                                   const AssumptionConstants& c, const Box& box, int samples,
                                   const InitialProfile* initial) {
  AssumptionReport report;
  const auto xs = sample_box(box, box.dimension() == 1 ? samples : std::min(samples, 64));
  const auto ys = sample_box(box, box.dimension() == 1 ? std::min(samples, 256) : 32);
  const int d = box.dimension();

  Worst diag, mass, quad_lower, quad_upper, hess_lower, hess_upper;
  for (const auto& x : xs) {
    const double r = model.intrinsic_rate(x);
    diag.update(model.kernel(x, x), x);
    double sup_c = model.kernel(x, x);
    TraitMatrix pos = TraitMatrix::Zero(d, d);
    TraitMatrix neg = TraitMatrix::Zero(d, d);
    for (const auto& y : ys) {
      const double cxy = model.kernel(x, y);
      sup_c = std::max(sup_c, cxy);
      mass.update(cxy - r / c.rho_M, x);
      const TraitMatrix hc = model.hess_xx_kernel(x, y);
      pos = pos.cwiseMax(hc.cwiseMax(0.0));
      neg = neg.cwiseMax((-hc).cwiseMax(0.0));
    }
    const double r2 = sq_dist(x, c.origin);
    quad_lower.update(r - sup_c * c.rho_M + c.K_under_1_prime * r2, x);
    quad_upper.update(c.K_bar_0_prime - c.K_bar_1_prime * r2 - r, x);
    const TraitMatrix hr = model.hess_intrinsic(x);
    const auto lo = eigen_range(TraitMatrix(hr - pos * c.rho_M)).first;
    const auto hi = eigen_range(TraitMatrix(hr + neg * c.rho_M)).second;
    hess_lower.update(lo + 2.0 * c.K_under_1_prime, x);
    hess_upper.update(-2.0 * c.K_bar_1_prime - hi, x);
  }
  {
    auto item = make_item("kernel_diagonal_positive", diag, false);
    item.passed = diag.margin > 0.0;
    report.items.push_back(item);
  }
  {
    auto item = make_item("competition_mass_bound", mass, false,
                          "sufficient condition C(x,y) >= r(x)/rho_M");
    if (!item.passed) {
      item.detail += " not met; bound inconclusive";
      report.warnings.push_back("competition_mass_bound: sufficient condition not met, inconclusive");
    }
    report.items.push_back(item);
  }
  report.items.push_back(make_item("local_rate_quadratic_lower", quad_lower, true));
  report.items.push_back(make_item("local_rate_quadratic_upper", quad_upper, true));
  report.items.push_back(make_item("local_rate_hessian_lower", hess_lower, true));
  {
    auto item = make_item("local_rate_hessian_upper", hess_upper, true);
    if (!(c.K_bar_1_prime > 0.0)) item.passed = false;
    report.items.push_back(item);
  }
  if (initial) {
    Worst viable;
    viable.update(model.intrinsic_rate(initial->x0), initial->x0);
    auto item = make_item("initial_point_viable", viable, false, "r(x0) > 0");
    item.passed = viable.margin > 0.0;
    report.items.push_back(item);
    Worst m;
    m.update(c.rho_M - initial->initial_mass, initial->x0);
    report.items.push_back(make_item("initial_mass_bound", m, false, "initial mass <= rho_M"));
    add_initial_items(report, c, xs, *initial, false);
  }
  report.items.push_back(check_compatibility(c.L_bar_1, c.K_bar_1_prime, c.K_under_1_prime,
                                             c.L_under_1, "compatibility_local_concavity"));
  collect_warnings(report);
  return report;
}

double invert_constraint(const GlobalInteractionModel& model, const TraitPoint& x) {
  const double hi_bound = model.i_max * (1.0 + kBracketMargin);
  const double r_lo = eval_growth(model, x, 0.0);
  if (std::abs(r_lo) <= kRootTol) return 0.0;
  const double r_hi = eval_growth(model, x, hi_bound);
  if (!(r_lo > 0.0 && r_hi < 0.0))
    throw ConstraintInfeasibleError("no sign change of R(x, I) on [0, " +
                                        std::to_string(hi_bound) + "] at x=" + format_point(x) +
                                        ": R(x,0)=" + std::to_string(r_lo) +
                                        ", R(x,I_hi)=" + std::to_string(r_hi),
                                    r_lo, r_hi);
  double a = 0.0;
  double b = hi_bound;
  // Bisection until Newton is safe, then polish.
  for (int it = 0; it < 40 && (b - a) > 1e-6 * hi_bound; ++it) {
    const double m = 0.5 * (a + b);
    const double rm = eval_growth(model, x, m);
    if (rm == 0.0) return m;
    (rm > 0.0 ? a : b) = m;
  }
  double I = 0.5 * (a + b);
  for (int it = 0; it < 50; ++it) {
    const double r = eval_growth(model, x, I);
    if (std::abs(r) <= kRootTol) return I;
    if (r > 0.0) a = I; else b = I;
    const double slope = model.d_rate_dI(x, I);
    double next = (slope < 0.0) ? I - r / slope : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (next == I) break;
    I = next;
  }
  const double r = eval_growth(model, x, I);
  if (std::abs(r) > kRootTol)
    throw ConstraintInfeasibleError("constraint inversion did not reach tolerance at x=" +
                                        format_point(x) + ", residual " + std::to_string(r),
                                    r_lo, r_hi);
  return I;
}

double steady_state_weight(const GlobalInteractionModel& model, const TraitPoint& y) {
  const double psi = model.weight(y);
  if (!(psi > 0.0))
    throw NoSteadyStateError("weight psi is not positive at y=" + format_point(y));
  return invert_constraint(model, y) / psi;
}

double steady_state_weight(const LocalCompetitionModel& model, const TraitPoint& y) {
  const double r = model.intrinsic_rate(y);
  if (!(r > 0.0))
    throw NoSteadyStateError("r(y) <= 0 at y=" + format_point(y) +
                             ": no positive Dirac steady state");
  const double cyy = model.kernel(y, y);
  if (!(cyy > 0.0)) throw NoSteadyStateError("C(y,y) <= 0 at y=" + format_point(y));
  return r / cyy;
}

double phi_potential(const LocalCompetitionModel& model, const TraitPoint& x) {
  const double r = model.intrinsic_rate(x);
  if (!(r > 0.0)) throw DomainError("phi is defined only where r > 0; x=" + format_point(x));
  const double cxx = model.kernel(x, x);
  if (!(cxx > 0.0)) throw DomainError("C(x,x) <= 0 at x=" + format_point(x));
  return std::log(r) - std::log(cxx);
}

TraitPoint kernel_diagonal_gradient(const LocalCompetitionModel& model, const TraitPoint& x) {
  return model.grad_x_kernel(x, x) + model.grad_y_kernel(x, x);
}

GlobalInteractionModel with_fd_derivatives(GlobalInteractionModel model) {
  const RateFn rate = model.rate;
  if (!model.grad_x_rate)
    model.grad_x_rate = [rate](const TraitPoint& x, double I) {
      return gradient_fd([&](const TraitPoint& y) { return rate(y, I); }, x);
    };
  if (!model.hess_x_rate)
    model.hess_x_rate = [rate](const TraitPoint& x, double I) {
      return hessian_fd([&](const TraitPoint& y) { return rate(y, I); }, x);
    };
  if (!model.d_rate_dI)
    model.d_rate_dI = [rate](const TraitPoint& x, double I) {
      const double h = 1e-5 * (1.0 + std::abs(I));
      return (rate(x, I + h) - rate(x, I - h)) / (2.0 * h);
    };
  if (!model.weight) model.weight = [](const TraitPoint&) { return 1.0; };
  return model;
}

LocalCompetitionModel with_fd_derivatives(LocalCompetitionModel model) {
  const PointFn r = model.intrinsic_rate;
  const KernelFn C = model.kernel;
  if (!model.grad_intrinsic)
    model.grad_intrinsic = [r](const TraitPoint& x) { return gradient_fd(r, x); };
  if (!model.hess_intrinsic)
    model.hess_intrinsic = [r](const TraitPoint& x) { return hessian_fd(r, x); };
  if (!model.grad_x_kernel)
    model.grad_x_kernel = [C](const TraitPoint& x, const TraitPoint& y) {
      return gradient_fd([&](const TraitPoint& z) { return C(z, y); }, x);
    };
  if (!model.grad_y_kernel)
    model.grad_y_kernel = [C](const TraitPoint& x, const TraitPoint& y) {
      return gradient_fd([&](const TraitPoint& z) { return C(x, z); }, y);
    };
  if (!model.hess_xx_kernel)
    model.hess_xx_kernel = [C](const TraitPoint& x, const TraitPoint& y) {
      return hessian_fd([&](const TraitPoint& z) { return C(z, y); }, x);
    };
  return model;
}

}  // namespace concentra
