#include "concentra/canonical.hpp"
#include "concentra/diagnostics.hpp"
#include "concentra/error.hpp"
#include "concentra/families.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace concentra;

namespace {

const Box kUnit{make_point(0.0, 0.0), make_point(1.0, 1.0)};
const Box kLine{make_point(-1.0), make_point(1.0)};

GlobalInteractionModel scenario1_rate() {
  return make_global_family("affine", {{"a0", 2.0}, {"slope", {-1.0, -1.0}}}, kUnit);
}

TraitMatrix diag(double a, double b) {
  TraitMatrix h = TraitMatrix::Zero(2, 2);
  h(0, 0) = a;
  h(1, 1) = b;
  return h;
}

TraitMatrix scalar(double a) { return TraitMatrix::Constant(1, 1, a); }

HessianClosure frozen(const TraitMatrix& h) { return {ClosureMode::Frozen, h, std::nullopt}; }

LocalCompetitionModel parabola_local() {
  return make_local_family("logistic", {{"r0", 1.0}, {"s", 1.0}, {"kernel", {{"type", "constant"}, {"c0", 1.0}}}},
                           kLine);
}

ConcentrationTrajectory trajectory(const std::vector<double>& ts, const std::vector<TraitPoint>& xs,
                                   const std::vector<double>& macro) {
  ConcentrationTrajectory t;
  for (std::size_t k = 0; k < ts.size(); ++k) t.push({ts[k], xs[k], macro[k], scalar(-2.0)});
  return t;
}

}  // namespace

TEST_CASE("canonical_rhs examples") {
  const auto m = scenario1_rate();
  const TraitPoint x = make_point(0.4, 0.5);
  const TraitPoint v = canonical_rhs(x, diag(-2.0, -2.0), m);
  CHECK(v[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(-0.5).epsilon(1e-14));
  const TraitPoint w = canonical_rhs(x, diag(-2.0, -10.0), m);
  CHECK(w[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(-0.1).epsilon(1e-14));

  const auto q = make_global_family("quadratic", {{"k0", 1.0}, {"center", {0.5, 0.5}}}, kUnit);
  CHECK(canonical_rhs(make_point(0.5, 0.5), diag(-1.0, -3.0), q).norm() == 0.0);
}

TEST_CASE("canonical_rhs rejects a non-concave closure") {
  CHECK_THROWS_AS(canonical_rhs(make_point(0.3, 0.3), diag(1.0, -2.0), scenario1_rate()), SingularClosureError);
  CHECK_THROWS_AS(canonical_rhs(make_point(0.3, 0.3), diag(0.0, -2.0), scenario1_rate()), SingularClosureError);
}

TEST_CASE("riccati closure examples") {
  // D²R = -2 K Id with K = 4: the fixed point is H = -2 Id
  const auto q = make_global_family("quadratic", {{"k0", 2.0}, {"curvature", {4.0, 4.0}}},
                                    Box{make_point(-1.0, -1.0), make_point(1.0, 1.0)});
  const TraitPoint x = make_point(0.1, -0.2);
  CHECK(riccati_hessian_rhs(x, 1.0, diag(-2.0, -2.0), q).cwiseAbs().maxCoeff() <= 1e-14);
  // equality case of the compatibility condition: H = -2 L Id with 4 L² = K
  const double K = 4.0, L = std::sqrt(K) / 2.0;
  CHECK(riccati_hessian_rhs(x, 0.5, diag(-2.0 * L, -2.0 * L), q).cwiseAbs().maxCoeff() <= 1e-14);
  const TraitMatrix dh = riccati_hessian_rhs(make_point(0.3, 0.3), 1.0, diag(-2.0, -2.0), scenario1_rate());
  CHECK((dh - diag(8.0, 8.0)).cwiseAbs().maxCoeff() <= 1e-14);
  TraitMatrix h(2, 2);
  h << -3.0, 0.7, 0.7, -1.0;
  const TraitMatrix s = riccati_hessian_rhs(x, 1.0, h, q);
  CHECK(s == s.transpose());
}

TEST_CASE("integrate_canonical with a flat rate stays put") {
  const auto m = make_global_family("affine", {{"a0", 1.0}}, kUnit);
  const auto res = integrate_canonical(make_point(0.3, 0.6), frozen(diag(-2.0, -2.0)), m, 0.01, 1.0);
  REQUIRE(res.trajectory.size() == 101u);
  for (const auto& s : res.trajectory.samples) CHECK((s.x_bar - make_point(0.3, 0.6)).norm() == 0.0);
  CHECK(res.trajectory.source == "canonical_frozen");
}

TEST_CASE("integrate_canonical matches the linear closed form") {
  const auto m = make_global_family("quadratic", {{"k0", 2.0}}, kLine);
  const auto res = integrate_canonical(make_point(0.8), frozen(scalar(-2.0)), m, 1e-3, 1.0);
  CHECK(std::abs(res.trajectory.samples.back().x_bar[0] - 0.8 * std::exp(-1.0)) <= 1e-10);
  CHECK(res.trajectory.samples.back().t == doctest::Approx(1.0));
}

TEST_CASE("property: RK4 converges at fourth order") {
  const auto m = make_global_family("quadratic", {{"k0", 2.0}}, kLine);
  auto error = [&](double dt) {
    const auto res = integrate_canonical(make_point(0.8), frozen(scalar(-2.0)), m, dt, 2.0);
    return std::abs(res.trajectory.samples.back().x_bar[0] - 0.8 * std::exp(-2.0));
  };
  const double ratio = error(0.1) / error(0.05);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("anisotropic frozen closure leaves the diagonal with slope one fifth") {
  const auto m = scenario1_rate();
  const TraitPoint x0 = make_point(0.7, 0.7);
  const auto res = integrate_canonical(x0, frozen(diag(-2.0, -10.0)), m, 0.01, 0.8, kUnit);
  for (const auto& s : res.trajectory.samples) {
    const TraitPoint d = s.x_bar - x0;
    CHECK(std::abs(d[1] - 0.2 * d[0]) <= 1e-12);
    CHECK(d[0] == doctest::Approx(-0.5 * s.t).epsilon(1e-12));
  }
}

TEST_CASE("integrate_canonical truncates at the domain exit") {
  const auto m = scenario1_rate();
  const auto res = integrate_canonical(make_point(0.1, 0.1), frozen(diag(-2.0, -2.0)), m, 0.01, 1.0, kUnit);
  REQUIRE(res.exit_time.has_value());
  CHECK(*res.exit_time == doctest::Approx(0.21));
  for (const auto& s : res.trajectory.samples) CHECK(kUnit.contains(s.x_bar));
  CHECK_THROWS_AS(integrate_canonical(make_point(1.5, 0.1), frozen(diag(-2.0, -2.0)), m, 0.01, 1.0, kUnit),
                  DomainError);
  CHECK_THROWS_AS(integrate_canonical(make_point(0.5, 0.5), {ClosureMode::FromPde, diag(-2, -2), std::nullopt}, m,
                                      0.01, 1.0),
                  ConfigError);
}

TEST_CASE("from_pde closure follows the interpolated feed") {
  ConcentrationTrajectory pde;
  pde.push({0.0, make_point(0.5, 0.5), 1.0, diag(-2.0, -2.0)});
  pde.push({0.5, make_point(0.5, 0.5), 1.0, diag(std::nan(""), -1.0)});
  pde.push({1.0, make_point(0.5, 0.5), 1.0, diag(-4.0, -4.0)});
  const auto feed = HessianFeed::from_trajectory(pde);
  REQUIRE(feed.times.size() == 2u);
  CHECK((feed.at(0.25) - diag(-2.5, -2.5)).norm() <= 1e-14);
  CHECK((feed.at(7.0) - diag(-4.0, -4.0)).norm() == 0.0);
  const auto res = integrate_canonical(make_point(0.6, 0.6), {ClosureMode::FromPde, diag(-1, -1), feed},
                                       scenario1_rate(), 0.01, 0.5);
  CHECK(res.trajectory.source == "canonical_from_pde");
  CHECK((res.trajectory.samples[50].hessian - feed.at(0.5)).norm() <= 1e-14);
}

TEST_CASE("gradient_flow_rate examples") {
  const auto m = scenario1_rate();
  CHECK(gradient_flow_rate(make_point(0.4, 0.4), diag(-2.0, -2.0), m) == doctest::Approx(1.0).epsilon(1e-14));
  const auto q = make_global_family("quadratic", {{"k0", 1.0}, {"center", {0.5, 0.5}}}, kUnit);
  CHECK(gradient_flow_rate(make_point(0.5, 0.5), diag(-2.0, -2.0), q) == 0.0);
}

TEST_CASE("property: the gradient-flow rate is nonnegative") {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double kappa = 0.1 + 2.0 * std::abs(U(gen));
    const TraitPoint slope = make_point(3.0 * U(gen), 3.0 * U(gen));
    const auto m = make_global_family(
        "affine", {{"a0", 5.0}, {"kappa", kappa}, {"slope", {slope[0], slope[1]}}, {"center", {0.5, 0.5}}}, kUnit);
    Eigen::Matrix2d A;
    A << U(gen), U(gen), U(gen), U(gen);
    const Eigen::Matrix2d spd = A * A.transpose() + 1e-3 * Eigen::Matrix2d::Identity();
    const TraitMatrix h = -spd;
    const TraitPoint x = make_point(0.5 + 0.4 * U(gen), 0.5 + 0.4 * U(gen));
    const double rate = gradient_flow_rate(x, h, m);
    CHECK(rate >= -1e-14);
    // direct quadratic form
    const Eigen::Vector2d g = slope;
    CHECK(rate == doctest::Approx(g.dot(spd.inverse() * g) / kappa).epsilon(1e-9));
  }
}

TEST_CASE("no-mutation weight ODE") {
  const auto m = parabola_local();
  const auto w = no_mutation_weight_ode(make_point(0.0), 0.1, m, 1e-3, 5.0);
  CHECK(std::abs(w.rho.back() - 1.0 / (1.0 + 9.0 * std::exp(-5.0))) <= 1e-8);
  const auto fixed = no_mutation_weight_ode(make_point(0.5), 0.75, m, 0.01, 2.0);
  for (double r : fixed.rho) CHECK(r == doctest::Approx(0.75).epsilon(1e-14));
  const auto dead = no_mutation_weight_ode(make_point(0.5), 0.0, m, 0.01, 2.0);
  for (double r : dead.rho) CHECK(r == 0.0);

  const auto g = make_global_family("affine", {{"a0", 1.0}, {"kappa", 2.0}}, kUnit);
  const auto gw = no_mutation_weight_ode(make_point(0.5, 0.5), 0.1, g, 0.01, 20.0);
  CHECK(gw.rho.back() == doctest::Approx(steady_state_weight(g, make_point(0.5, 0.5))).epsilon(1e-8));
}

TEST_CASE("long-time attractors") {
  const auto q = make_global_family("quadratic", {{"k0", 1.5}}, Box{make_point(-1.0, -1.0), make_point(1.0, 1.0)});
  const auto a = long_time_attractor(q, Box{make_point(-1.0, -1.0), make_point(1.0, 1.0)});
  REQUIRE(a.found);
  CHECK(a.point.norm() <= 1e-10);
  CHECK(a.macro == doctest::Approx(1.5).epsilon(1e-12));

  const auto none = long_time_attractor(scenario1_rate(), kUnit);
  CHECK_FALSE(none.found);
  CHECK(none.diagnostic.find("gradient never vanishes") != std::string::npos);

  const auto l = long_time_attractor(parabola_local(), kLine);
  REQUIRE(l.found);
  CHECK(std::abs(l.point[0]) <= 1e-8);
  CHECK(l.macro == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("persistence envelope") {
  const auto m = parabola_local();
  const auto still = trajectory({0.0, 1.0, 2.0}, {make_point(0.5), make_point(0.5), make_point(0.5)}, {0.75, 0.75, 0.75});
  CHECK(persistence_envelope(still, m).K == 0.0);
  const auto rising = trajectory({0.0, 1.0, 2.0}, {make_point(0.5), make_point(0.3), make_point(0.1)}, {0.75, 0.91, 0.99});
  CHECK(persistence_envelope(rising, m).K == 0.0);

  // r(x̄(t)) = e^{-2t} r(x̄⁰) with r = 1 - x²
  std::vector<double> ts;
  std::vector<TraitPoint> xs;
  std::vector<double> macro;
  for (int k = 0; k <= 10; ++k) {
    const double t = 0.1 * k;
    const double r = 0.9 * std::exp(-2.0 * t);
    ts.push_back(t);
    xs.push_back(make_point(std::sqrt(1.0 - r)));
    macro.push_back(r);
  }
  const auto rep = persistence_envelope(trajectory(ts, xs, macro), m);
  CHECK(rep.K == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(rep.r_positive);
  CHECK_THROWS_AS(persistence_envelope(trajectory({0.0}, {make_point(1.0)}, {0.0}), m), DomainError);
}

TEST_CASE("lyapunov quantity along the local canonical flow") {
  const auto m = parabola_local();
  const auto eq = trajectory({0.0, 1.0}, {make_point(0.0), make_point(0.0)}, {1.0, 1.0});
  CHECK(lyapunov_local(eq, m).passed(1e-12));

  const auto res = integrate_canonical(make_point(0.5), frozen(scalar(-2.0)), m, 0.01, 3.0, kLine);
  const auto rep = lyapunov_local(res.trajectory, m);
  CHECK(rep.passed(0.0));
  CHECK(rep.worst_increment > 0.0);
  for (std::size_t k = 1; k < rep.series.size(); ++k) CHECK(rep.series[k] > rep.series[k - 1]);

  auto asym = m;
  asym.symmetric = false;
  CHECK_FALSE(lyapunov_local(res.trajectory, asym).applicable);
  CHECK_FALSE(lyapunov_local(res.trajectory, asym).passed(1.0));
}

TEST_CASE("property: concave canonical trajectories keep the constraint and raise the macro") {
  const Box box{make_point(-1.0, -1.0), make_point(1.0, 1.0)};
  const auto q = make_global_family("quadratic", {{"k0", 1.0}, {"curvature", {1.0, 2.0}}}, box);
  const auto att = long_time_attractor(q, box);
  REQUIRE(att.found);
  for (auto mode : {ClosureMode::Frozen, ClosureMode::Riccati}) {
    const auto res = integrate_canonical(make_point(0.6, -0.4), {mode, diag(-1.0, -3.0), std::nullopt}, q, 0.01, 8.0, box);
    const auto macros = res.trajectory.macros();
    CHECK(monotonicity_violation(macros) >= -1e-10);
    CHECK(constraint_residual(res.trajectory, q, 0.0).max_all <= kRootTol);
    CHECK(std::abs(macros.back() - att.macro) <= 1e-3);
  }
}

TEST_CASE("property: a separable local model reproduces the global canonical flow") {
  // C(x, y) = Φ(x) ψ(y) with ψ ≡ 1 against R(x, I) = r(x) - Φ(x) I
  const auto r = [](const TraitPoint& x) { return 1.0 - x.squaredNorm(); };
  const auto phi = [](const TraitPoint& x) { return 1.0 + 0.5 * x[0] * x[0] + 0.2 * x[1]; };
  const auto grad_phi = [](const TraitPoint& x) { return make_point(x[0], 0.2); };
  const Box box{make_point(-1.0, -1.0), make_point(1.0, 1.0)};

  LocalCompetitionModel local;
  local.dimension = 2;
  local.intrinsic_rate = r;
  local.grad_intrinsic = [](const TraitPoint& x) { return TraitPoint(-2.0 * x); };
  local.hess_intrinsic = [](const TraitPoint&) { return TraitMatrix(-2.0 * TraitMatrix::Identity(2, 2)); };
  local.kernel = [phi](const TraitPoint& x, const TraitPoint&) { return phi(x); };
  local.grad_x_kernel = [grad_phi](const TraitPoint& x, const TraitPoint&) { return grad_phi(x); };
  local.grad_y_kernel = [](const TraitPoint&, const TraitPoint&) { return TraitPoint(TraitPoint::Zero(2)); };
  local.hess_xx_kernel = [](const TraitPoint&, const TraitPoint&) {
    TraitMatrix h = TraitMatrix::Zero(2, 2);
    h(0, 0) = 1.0;
    return h;
  };

  GlobalInteractionModel global;
  global.dimension = 2;
  global.rate = [r, phi](const TraitPoint& x, double I) { return r(x) - phi(x) * I; };
  global.grad_x_rate = [grad_phi](const TraitPoint& x, double I) { return TraitPoint(-2.0 * x - I * grad_phi(x)); };
  global.hess_x_rate = [](const TraitPoint&, double I) {
    TraitMatrix h = -2.0 * TraitMatrix::Identity(2, 2);
    h(0, 0) -= I;
    return h;
  };
  global.d_rate_dI = [phi](const TraitPoint& x, double) { return -phi(x); };
  global.weight = [](const TraitPoint&) { return 1.0; };
  global.i_max = 1.0;

  const TraitPoint x0 = make_point(0.5, -0.3);
  for (auto mode : {ClosureMode::Frozen, ClosureMode::Riccati}) {
    const HessianClosure c{mode, diag(-2.0, -1.0), std::nullopt};
    const auto a = integrate_canonical(x0, c, local, 0.01, 2.0, box);
    const auto b = integrate_canonical(x0, c, global, 0.01, 2.0, box);
    CHECK(compare_trajectories(a.trajectory, b.trajectory).sup_distance <= 1e-9);
  }
}

TEST_CASE("mark_dominated picks the bump with the smaller constraint value") {
  const auto m = make_global_family("elliptic", {{"re", 1.1}}, kUnit);
  const double c = 0.35355339059327379;
  const auto v = mark_dominated({make_point(c, 0.0), make_point(0.0, c)}, m);
  REQUIRE(v.size() == 2u);
  CHECK_FALSE(v[0].dominated);
  CHECK(v[1].dominated);
  CHECK(v[0].macro > v[1].macro);
  const auto tie = mark_dominated({make_point(c, 0.0), make_point(0.0, c)},
                                  make_global_family("elliptic", {{"re", 1.0}}, kUnit));
  CHECK_FALSE(tie[0].dominated);
  CHECK_FALSE(tie[1].dominated);
}

TEST_CASE("closure names round-trip") {
  for (auto m : {ClosureMode::FromPde, ClosureMode::Frozen, ClosureMode::Riccati})
    CHECK(parse_closure(to_string(m)) == m);
  CHECK_THROWS_AS(parse_closure("magic"), ValidationError);
}
