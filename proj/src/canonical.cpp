#include "concentra/canonical.hpp"

#include "concentra/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace concentra {

std::string to_string(ClosureMode mode) {
  switch (mode) {
    case ClosureMode::FromPde:
      return "from_pde";
    case ClosureMode::Frozen:
      return "frozen";
    case ClosureMode::Riccati:
      return "riccati";
  }
  return "unknown";
}

ClosureMode parse_closure(const std::string& s) {
  if (s == "from_pde") return ClosureMode::FromPde;
  if (s == "frozen") return ClosureMode::Frozen;
  if (s == "riccati") return ClosureMode::Riccati;
  throw ValidationError("closure", "unknown closure '" + s + "' (from_pde|frozen|riccati)");
}

HessianFeed HessianFeed::from_trajectory(const ConcentrationTrajectory& traj) {
  HessianFeed f;
  for (const auto& s : traj.samples)
    if (s.hessian.size() > 0 && s.hessian.allFinite()) {
      f.times.push_back(s.t);
      f.hessians.push_back(s.hessian);
    }
  return f;
}

TraitMatrix HessianFeed::at(double t) const {
  if (times.empty()) throw SingularClosureError("Hessian feed is empty");
  if (t <= times.front()) return hessians.front();
  if (t >= times.back()) return hessians.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - w) * hessians[k - 1] + w * hessians[k];
}

namespace {

TraitPoint solve_closure(const TraitMatrix& hessian, const TraitPoint& rhs) {
  const TraitMatrix neg = -hessian;
  Eigen::LLT<TraitMatrix> llt(neg);
  if (!hessian.allFinite() || llt.info() != Eigen::Success)
    throw SingularClosureError("-D²u is not positive definite: H = " +
                               format_point(Eigen::Map<const TraitPoint>(hessian.data(), hessian.size())));
  return llt.solve(rhs);
}

TraitPoint local_drive(const TraitPoint& x, const LocalCompetitionModel& m, double rho) {
  return m.grad_intrinsic(x) - rho * m.grad_x_kernel(x, x);
}

double local_rho(const LocalCompetitionModel& m, const TraitPoint& x) {
  const double c = m.kernel(x, x);
  if (!(c > 0.0)) throw DomainError("C(x,x) <= 0 at " + format_point(x));
  return std::max(0.0, m.intrinsic_rate(x)) / c;
}

}  // namespace

TraitPoint canonical_rhs(const TraitPoint& x, const TraitMatrix& h, const GlobalInteractionModel& m) {
  const double I = invert_constraint(m, x);
  return solve_closure(h, m.grad_x_rate(x, I));
}

TraitPoint canonical_rhs(const TraitPoint& x, const TraitMatrix& h, const LocalCompetitionModel& m) {
  return solve_closure(h, local_drive(x, m, local_rho(m, x)));
}

TraitMatrix riccati_hessian_rhs(const TraitPoint& x, double macro, const TraitMatrix& h,
                                const GlobalInteractionModel& m) {
  TraitMatrix out = m.hess_x_rate(x, macro) + 2.0 * h * h;
  return 0.5 * (out + out.transpose());
}

TraitMatrix riccati_hessian_rhs(const TraitPoint& x, double macro, const TraitMatrix& h,
                                const LocalCompetitionModel& m) {
  TraitMatrix out = m.hess_intrinsic(x) - macro * m.hess_xx_kernel(x, x) + 2.0 * h * h;
  return 0.5 * (out + out.transpose());
}

double limit_macro(const GrowthModel& model, const TraitPoint& x) {
  if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) return invert_constraint(*g, x);
  return local_rho(std::get<LocalCompetitionModel>(model), x);
}

namespace {

struct OdeState {
  TraitPoint x;
  TraitMatrix h;
};

}  // namespace

CanonicalResult integrate_canonical(const TraitPoint& x0, const HessianClosure& closure,
                                    const GrowthModel& model, double dt, double T,
                                    const std::optional<Box>& domain) {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (!(T >= 0.0)) throw ValidationError("T", "must be nonnegative");
  if (domain && !domain->contains(x0))
    throw DomainError("initial point " + format_point(x0) + " lies outside the domain");
  if (closure.mode == ClosureMode::FromPde && !closure.feed)
    throw ConfigError("from_pde closure requires a Hessian feed from a PDE run");
  const int d = static_cast<int>(x0.size());
  TraitMatrix h0 = closure.initial_hessian;
  if (closure.mode == ClosureMode::FromPde) h0 = closure.feed->at(0.0);
  if (h0.rows() != d || h0.cols() != d)
    throw ValidationError("closure.initial_hessian", "must be a d x d matrix");
  solve_closure(h0, TraitPoint::Zero(d));

  const bool riccati = closure.mode == ClosureMode::Riccati;
  auto hessian_at_time = [&](double t, const TraitMatrix& h) -> TraitMatrix {
    if (closure.mode == ClosureMode::FromPde) return closure.feed->at(t);
    if (closure.mode == ClosureMode::Frozen) return closure.initial_hessian;
    return h;
  };
  auto rhs = [&](double t, const OdeState& s) {
    OdeState out;
    const TraitMatrix h = hessian_at_time(t, s.h);
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
      out.x = canonical_rhs(s.x, h, *g);
      out.h = riccati ? riccati_hessian_rhs(s.x, invert_constraint(*g, s.x), h, *g)
                      : TraitMatrix(TraitMatrix::Zero(d, d));
    } else {
      const auto& m = std::get<LocalCompetitionModel>(model);
      out.x = canonical_rhs(s.x, h, m);
      out.h = riccati ? riccati_hessian_rhs(s.x, local_rho(m, s.x), h, m)
                      : TraitMatrix(TraitMatrix::Zero(d, d));
    }
    return out;
  };

  CanonicalResult res;
  res.trajectory.source = "canonical_" + to_string(closure.mode);
  OdeState s{x0, h0};
  auto push = [&](double t) {
    TrajectorySample sample;
    sample.t = t;
    sample.x_bar = s.x;
    sample.macro = limit_macro(model, s.x);
    sample.hessian = hessian_at_time(t, s.h);
    res.trajectory.push(std::move(sample));
  };
  push(0.0);
  const long steps = std::lround(T / dt);
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    const OdeState k1 = rhs(t, s);
    const OdeState s2{s.x + 0.5 * dt * k1.x, s.h + 0.5 * dt * k1.h};
    const OdeState k2 = rhs(t + 0.5 * dt, s2);
    const OdeState s3{s.x + 0.5 * dt * k2.x, s.h + 0.5 * dt * k2.h};
    const OdeState k3 = rhs(t + 0.5 * dt, s3);
    const OdeState s4{s.x + dt * k3.x, s.h + dt * k3.h};
    const OdeState k4 = rhs(t + dt, s4);
    OdeState next{s.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                  s.h + dt / 6.0 * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h)};
    next.h = 0.5 * (next.h + next.h.transpose());
    if (domain && !domain->contains(next.x)) {
      res.exit_time = (k + 1) * dt;
      break;
    }
    s = next;
    push((k + 1) * dt);
  }
  return res;
}

double gradient_flow_rate(const TraitPoint& x, const TraitMatrix& h, const GlobalInteractionModel& m) {
  const double I = invert_constraint(m, x);
  const TraitPoint g = m.grad_x_rate(x, I);
  const double ri = m.d_rate_dI(x, I);
  if (!(ri < 0.0)) throw DomainError("dR/dI must be negative at " + format_point(x));
  return (-1.0 / ri) * g.dot(solve_closure(h, g));
}

WeightSeries no_mutation_weight_ode(const TraitPoint& y, double rho0, const GrowthModel& model,
                                    double dt, double T) {
  if (rho0 < 0.0) throw ValidationError("rho0", "must be nonnegative");
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  std::function<double(double)> f;
  if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
    const double psi = g->weight ? g->weight(y) : 1.0;
    f = [g, y, psi](double rho) { return rho * g->rate(y, psi * rho); };
  } else {
    const auto& m = std::get<LocalCompetitionModel>(model);
    const double r = m.intrinsic_rate(y);
    const double c = m.kernel(y, y);
    f = [r, c](double rho) { return rho * (r - rho * c); };
  }
  WeightSeries w;
  double rho = rho0;
  w.times.push_back(0.0);
  w.rho.push_back(rho);
  const long steps = std::lround(T / dt);
  for (long k = 0; k < steps; ++k) {
    const double k1 = f(rho);
    const double k2 = f(rho + 0.5 * dt * k1);
    const double k3 = f(rho + 0.5 * dt * k2);
    const double k4 = f(rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    w.times.push_back((k + 1) * dt);
    w.rho.push_back(rho);
  }
  return w;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<TraitPoint> starts(const Box& box) {
  std::vector<TraitPoint> out{box.center()};
  const int d = box.dimension();
  const int n = 5;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < (d == 2 ? n : 1); ++j) {
      TraitPoint p = box.lower;
      p[0] += (i + 0.5) / n * (box.upper[0] - box.lower[0]);
      if (d == 2) p[1] += (j + 0.5) / n * (box.upper[1] - box.lower[1]);
      out.push_back(p);
    }
  return out;
}

bool inside(const Box& box, const TraitPoint& x, double slack) {
  for (int a = 0; a < box.dimension(); ++a) {
    const double w = slack * (box.upper[a] - box.lower[a]);
    if (x[a] < box.lower[a] - w || x[a] > box.upper[a] + w) return false;
  }
  return true;
}

std::optional<Attractor> newton_global(const GlobalInteractionModel& m, const Box& box,
                                       TraitPoint x) {
  const int d = static_cast<int>(x.size());
  double I = m.i_max;
  for (int it = 0; it < 100; ++it) {
    const TraitPoint g = m.grad_x_rate(x, I);
    const double r = m.rate(x, I);
    Eigen::VectorXd F(d + 1);
    F.head(d) = g;
    F[d] = r;
    if (!F.allFinite()) return std::nullopt;
    if (F.norm() < 1e-13) {
      if (!inside(box, x, 1e-9)) return std::nullopt;
      return Attractor{true, x, I, "converged"};
    }
    const double hI = 1e-6 * (1.0 + std::abs(I));
    const TraitPoint gI = (m.grad_x_rate(x, I + hI) - m.grad_x_rate(x, I - hI)) / (2.0 * hI);
    Eigen::MatrixXd Jm(d + 1, d + 1);
    Jm.topLeftCorner(d, d) = m.hess_x_rate(x, I);
    Jm.topRightCorner(d, 1) = gI;
    Jm.bottomLeftCorner(1, d) = g.transpose();
    Jm(d, d) = m.d_rate_dI(x, I);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jm);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::VectorXd step = lu.solve(-F);
    x += step.head(d);
    I += step[d];
    if (!inside(box, x, 1.0)) return std::nullopt;
  }
  return std::nullopt;
}

TraitPoint phi_gradient(const LocalCompetitionModel& m, const TraitPoint& x) {
  return m.grad_intrinsic(x) / m.intrinsic_rate(x) -
         kernel_diagonal_gradient(m, x) / m.kernel(x, x);
}

std::optional<Attractor> newton_local(const LocalCompetitionModel& m, const Box& box, TraitPoint x) {
  const int d = static_cast<int>(x.size());
  if (!(m.intrinsic_rate(x) > 0.0)) return std::nullopt;
  for (int it = 0; it < 100; ++it) {
    const TraitPoint g = phi_gradient(m, x);
    if (!g.allFinite()) return std::nullopt;
    if (g.norm() < 1e-13) {
      if (!inside(box, x, 1e-9)) return std::nullopt;
      TraitMatrix H(d, d);
      const double h = fd_step(x);
      for (int a = 0; a < d; ++a) {
        TraitPoint xp = x, xm = x;
        xp[a] += h;
        xm[a] -= h;
        H.col(a) = (phi_gradient(m, xp) - phi_gradient(m, xm)) / (2.0 * h);
      }
      Eigen::SelfAdjointEigenSolver<TraitMatrix> es(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().maxCoeff() < 0.0)) return std::nullopt;
      return Attractor{true, x, m.intrinsic_rate(x) / m.kernel(x, x), "converged"};
    }
    TraitMatrix H(d, d);
    const double h = fd_step(x);
    for (int a = 0; a < d; ++a) {
      TraitPoint xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      H.col(a) = (phi_gradient(m, xp) - phi_gradient(m, xm)) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose());
    TraitPoint step = H.fullPivLu().solve(-g);
    if (!step.allFinite()) return std::nullopt;
    // Backtrack to stay where r > 0.
    double lambda = 1.0;
    while (lambda > 1e-6 && !(m.intrinsic_rate(x + lambda * step) > 0.0)) lambda *= 0.5;
    x += lambda * step;
    if (!inside(box, x, 1.0)) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

Attractor long_time_attractor(const GrowthModel& model, const Box& box) {
  for (const TraitPoint& x0 : starts(box)) {
    std::optional<Attractor> a;
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model))
      a = newton_global(*g, box, x0);
    else
      a = newton_local(std::get<LocalCompetitionModel>(model), box, x0);
    if (a) return *a;
  }
  Attractor none;
  none.diagnostic = "gradient never vanishes";
  return none;
}

PersistenceReport persistence_envelope(const ConcentrationTrajectory& traj,
                                       const LocalCompetitionModel& m) {
  if (traj.empty()) throw ValidationError("trajectory", "is empty");
  PersistenceReport p;
  const auto& first = traj.samples.front();
  p.r_initial = m.intrinsic_rate(first.x_bar);
  if (!(p.r_initial > 0.0))
    throw DomainError("persistence requires r(x0) > 0, got " + std::to_string(p.r_initial));
  p.r_min = p.r_initial;
  for (const auto& s : traj.samples) {
    const double r = m.intrinsic_rate(s.x_bar);
    p.r_min = std::min(p.r_min, r);
    if (!(r > 0.0)) {
      p.r_positive = false;
      p.K = std::numeric_limits<double>::infinity();
      continue;
    }
    const double dt = s.t - first.t;
    if (dt > 0.0 && p.r_positive) p.K = std::max(p.K, -std::log(r / p.r_initial) / dt);
  }
  return p;
}

LyapunovReport lyapunov_local(const ConcentrationTrajectory& traj, const LocalCompetitionModel& m) {
  LyapunovReport l;
  if (!m.symmetric) {
    l.applicable = false;
    return l;
  }
  for (const auto& s : traj.samples) l.series.push_back(s.macro * s.macro * m.kernel(s.x_bar, s.x_bar));
  l.worst_increment = l.series.size() < 2 ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < l.series.size(); ++k)
    l.worst_increment = std::min(l.worst_increment, l.series[k] - l.series[k - 1]);
  return l;
}

std::vector<BumpVerdict> mark_dominated(const std::vector<TraitPoint>& centers,
                                        const GlobalInteractionModel& model) {
  std::vector<BumpVerdict> out;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : centers) {
    out.push_back({c, invert_constraint(model, c), false});
    best = std::max(best, out.back().macro);
  }
  for (auto& v : out) v.dominated = v.macro < best - 1e-12 * (1.0 + std::abs(best));
  return out;
}

}  // namespace concentra
