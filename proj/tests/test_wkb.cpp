#include "concentra/error.hpp"
#include "concentra/pde.hpp"
#include "concentra/wkb.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace concentra;

namespace {

TraitGrid unit_grid(int n) { return build_grid(2, make_point(0.0, 0.0), make_point(1.0, 1.0), {n, n}); }

WkbField field(const TraitGrid& g, const PointFn& f, double eps = 0.005) {
  WkbField u;
  u.grid = g;
  u.epsilon = eps;
  for (std::size_t k = 0; k < g.size(); ++k) u.values.push_back(f(g.node(k)));
  u.floored.assign(g.size(), false);
  return u;
}

AssumptionConstants bracket(double L_bar, double L_under) {
  AssumptionConstants c;
  c.origin = make_point(0.0, 0.0);
  c.L_bar_1 = L_bar;
  c.L_under_1 = L_under;
  return c;
}

}  // namespace

TEST_CASE("to_wkb closed forms") {
  const auto g = unit_grid(20);
  const double eps = 0.005;
  const auto one = to_wkb(DensityField(g, std::vector<double>(g.size(), 1.0)), eps);
  for (double v : one.values) CHECK(v == 0.0);

  const TraitPoint c = make_point(0.45, 0.55);
  const auto n = DensityField::sample(g, [&](const TraitPoint& x) { return std::exp(-(x - c).squaredNorm() / eps); });
  const auto u = to_wkb(n, eps);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!u.floored[k]) CHECK(u.values[k] == doctest::Approx(-(g.node(k) - c).squaredNorm()).epsilon(1e-12));

  const auto zero = to_wkb(DensityField(g, std::vector<double>(g.size(), 0.0)), eps);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(zero.floored[k]);
    CHECK(zero.values[k] == eps * std::log(kDensityFloor));
  }
  CHECK(zero.resolved_nodes().empty());
}

TEST_CASE("from_wkb closed forms and overflow") {
  const auto g = unit_grid(10);
  const auto n = from_wkb(field(g, [](const TraitPoint&) { return 0.0; }), 0.005);
  for (double v : n.values) CHECK(v == 1.0);

  const auto small = from_wkb(field(g, [](const TraitPoint&) { return -0.5; }), 0.005);
  CHECK(small.values[0] > 0.0);
  CHECK(small.values[0] == doctest::Approx(std::exp(-100.0)).epsilon(1e-14));
  CHECK(small.values[0] == doctest::Approx(3.720075976020836e-44).epsilon(1e-12));

  auto big = field(g, [](const TraitPoint&) { return 0.0; });
  big.values[37] = 4.0;
  try {
    from_wkb(big, 0.005);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(e.node() == 37u);
  }
}

TEST_CASE("property: the transform is bijective above the floor") {
  const auto g = unit_grid(30);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> U(-1.0, 0.0);
  auto u = field(g, [&](const TraitPoint&) { return U(gen); });
  const double eps = 0.005;
  const auto back = to_wkb(from_wkb(u, eps), eps);
  for (std::size_t k = 0; k < g.size(); ++k)
    CHECK(std::abs(back.values[k] - u.values[k]) <= 1e-13 * std::abs(u.values[k]));

  std::uniform_real_distribution<double> N(1e-200, 5.0);
  std::vector<double> dens(g.size());
  for (auto& v : dens) v = N(gen);
  const DensityField n(g, dens);
  const auto again = from_wkb(to_wkb(n, eps), eps);
  for (std::size_t k = 0; k < g.size(); ++k)
    CHECK(std::abs(again.values[k] - dens[k]) <= 1e-13 * dens[k] * std::abs(std::log(dens[k])) + 1e-300);
}

TEST_CASE("locate_max recovers an off-node quadratic centre") {
  const auto g = unit_grid(50);
  const TraitPoint c = make_point(0.4137, 0.6021);
  const auto u = field(g, [&](const TraitPoint& x) { return -2.0 * (x - c).squaredNorm(); });
  const auto m = locate_max(u, false);
  REQUIRE(m.size() == 1u);
  CHECK((m[0].point - c).norm() <= 1e-10);
  CHECK(std::abs(m[0].value) <= 1e-10);
  CHECK_FALSE(m[0].on_boundary);
}

TEST_CASE("locate_max finds two equal bumps in multi mode") {
  const auto g = unit_grid(60);
  const TraitPoint a = make_point(0.25, 0.5), b = make_point(0.75, 0.5);
  const auto u = field(g, [&](const TraitPoint& x) {
    return std::max(-(x - a).squaredNorm(), -(x - b).squaredNorm());
  });
  const auto m = locate_max(u, true);
  REQUIRE(m.size() == 2u);
  const bool order = m[0].point[0] < m[1].point[0];
  CHECK((m[order ? 0 : 1].point - a).norm() <= 1e-10);
  CHECK((m[order ? 1 : 0].point - b).norm() <= 1e-10);
  CHECK(locate_max(u, false).size() == 1u);
}

TEST_CASE("locate_max on a quartic converges to the dense-sampling argmax") {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> U(0.3, 0.7);
  std::vector<double> centres(40);
  for (auto& c : centres) c = U(gen);
  std::vector<double> worst;
  for (int n : {16, 32, 64, 128}) {
    const auto g = build_grid(1, make_point(0.0), make_point(1.0), {n});
    const auto dense = build_grid(1, make_point(0.0), make_point(1.0), {64 * n});
    double sup = 0.0;
    for (double c : centres) {
      const PointFn f = [c](const TraitPoint& x) { return -std::pow(x[0] - c, 4); };
      const auto m = locate_max(field(g, f), false).front();
      // oracle: argmax on a lattice 64x finer
      double best = -1e300, arg = 0.0;
      for (std::size_t k = 0; k < dense.size(); ++k)
        if (f(dense.node(k)) > best) best = f(dense.node(k)), arg = dense.node(k)[0];
      const double err = std::abs(m.point[0] - arg);
      CHECK(err <= g.spacing(0));
      sup = std::max(sup, err);
    }
    worst.push_back(sup);
  }
  for (std::size_t k = 1; k < worst.size(); ++k) CHECK(worst[k] < worst[k - 1]);
  CHECK(worst.back() <= worst.front() / 4.0);
}

TEST_CASE("locate_max flags a maximum on the boundary ring") {
  const auto g = unit_grid(20);
  const auto u = field(g, [](const TraitPoint& x) { return x[0] + x[1]; });
  const auto m = locate_max(u, false).front();
  CHECK(m.on_boundary);
  CHECK(m.node == g.index(19, 19));
}

TEST_CASE("hessian_at on quadratics") {
  const auto g = unit_grid(40);
  const TraitPoint c = make_point(0.51, 0.47);
  const auto u = field(g, [&](const TraitPoint& x) {
    return -1.5 * (x[0] - c[0]) * (x[0] - c[0]) - 4.0 * (x[1] - c[1]) * (x[1] - c[1]);
  });
  const TraitMatrix H = hessian_at(u, c);
  CHECK(std::abs(H(0, 0) + 3.0) <= 1e-10);
  CHECK(std::abs(H(1, 1) + 8.0) <= 1e-10);
  CHECK(std::abs(H(0, 1)) <= 1e-10);
  CHECK(H(0, 1) == H(1, 0));

  // rotated quadratic: -zᵀ A z with A = Rᵀ diag(1, 6) R
  const double th = 0.6;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Eigen::Matrix2d A = R.transpose() * Eigen::Vector2d(1.0, 6.0).asDiagonal() * R;
  const auto v = field(g, [&](const TraitPoint& x) {
    const Eigen::Vector2d z = x - c;
    return -z.dot(A * z);
  });
  const TraitMatrix Hr = hessian_at(v, c);
  CHECK((Hr - TraitMatrix(-2.0 * A)).cwiseAbs().maxCoeff() <= 1e-8);

  CHECK_THROWS_AS(hessian_at(u, make_point(0.02, 0.5)), BoundaryError);
}

TEST_CASE("hessian of the anisotropic initial phase") {
  const auto g = unit_grid(100);
  const double eps = 0.005;
  TraitMatrix form = TraitMatrix::Zero(2, 2);
  form(0, 0) = 1.0;
  form(1, 1) = 5.0;
  const auto n = init_density(g, {{make_point(0.7, 0.7), form, 1.0}}, eps, 0.3);
  const auto u = to_wkb(n, eps);
  const auto top = locate_max(u, false).front();
  const TraitMatrix H = hessian_at(u, top.point);
  CHECK(H(0, 0) == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(H(1, 1) == doctest::Approx(-10.0).epsilon(1e-8));
  CHECK(std::abs(H(0, 1)) <= 1e-8);
  CHECK((top.point - make_point(0.7, 0.7)).norm() <= 1e-8);
}

TEST_CASE("property: argmax invariance under constants and Hessian under affine terms") {
  const auto g = unit_grid(40);
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const TraitPoint c = make_point(0.3 + 0.4 * (U(gen) + 1) / 2, 0.3 + 0.4 * (U(gen) + 1) / 2);
    const double a1 = 1.0 + std::abs(U(gen)), a2 = 1.0 + std::abs(U(gen)), x3 = U(gen);
    const PointFn base = [=](const TraitPoint& x) {
      const TraitPoint z = x - c;
      return -a1 * z[0] * z[0] - a2 * z[1] * z[1] + 0.2 * z[0] * z[1] + x3 * z[0] * z[0] * z[0];
    };
    const double shift = U(gen) * 3.0;
    const auto u = field(g, base);
    const auto v = field(g, [&](const TraitPoint& x) { return base(x) + shift; });
    const auto mu = locate_max(u, false).front(), mv = locate_max(v, false).front();
    CHECK((mu.point - mv.point).norm() <= 1e-12);
    CHECK(std::abs(mv.value - mu.value - shift) <= 1e-12);

    const double p = U(gen), q = U(gen);
    const auto w = field(g, [&](const TraitPoint& x) { return base(x) + p * x[0] + q * x[1] + shift; });
    const TraitMatrix hu = hessian_at(u, c), hw = hessian_at(w, c);
    CHECK((hu - hw).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("regularity monitor passes an exact quadratic with zero margin") {
  const auto g = unit_grid(40);
  const double L = 1.5;
  const auto u = field(g, [&](const TraitPoint& x) { return -L * x.squaredNorm(); }, 0.01);
  auto c = bracket(L, L);
  const auto r = regularity_monitor(u, c, 0.0);
  CHECK(r.envelope_passed);
  CHECK(std::abs(r.envelope_margin) <= 1e-12);
  CHECK(r.hessian_passed);
  CHECK(r.hessian_min_eig == doctest::Approx(-2.0 * L).epsilon(1e-9));
  CHECK(r.hessian_max_eig == doctest::Approx(-2.0 * L).epsilon(1e-9));
  CHECK(r.gradient_passed);
  CHECK(r.third_derivative_max <= 1e-6);
  CHECK(r.resolved_nodes > 0u);
  const auto j = to_json(r);
  CHECK(j["hessian"]["passed"] == true);
}

TEST_CASE("regularity monitor flags a flat quartic maximum") {
  const auto g = build_grid(2, make_point(-0.5, -0.5), make_point(0.5, 0.5), {40, 40});
  const auto u = field(g, [](const TraitPoint& x) { return -std::pow(x.squaredNorm(), 2); }, 0.01);
  const auto r = regularity_monitor(u, bracket(1.0, 10.0), 0.0);
  CHECK_FALSE(r.hessian_passed);
  CHECK(r.hessian_max_eig > -2.0);
  REQUIRE(r.hessian_worst.has_value());
  CHECK(r.hessian_worst->norm() <= 0.1);
}

TEST_CASE("regularity monitor gradient growth on linear data") {
  const auto g = unit_grid(30);
  const TraitPoint slope = make_point(0.3, -0.4);
  const auto u = field(g, [&](const TraitPoint& x) { return slope.dot(x); }, 0.05);
  auto c = bracket(0.0, 0.0);
  c.L_bar_0 = 10.0;
  c.L_under_0 = 10.0;
  c.C_grad_u = slope.norm();
  const auto r = regularity_monitor(u, c, 0.0);
  CHECK(r.gradient_passed);
  CHECK(r.gradient_constant <= slope.norm() * (1.0 + 1e-12));
  CHECK(r.gradient_constant >= 0.5 * slope.norm());
  c.C_grad_u = 0.5 * r.gradient_constant;
  CHECK_FALSE(regularity_monitor(u, c, 0.0).gradient_passed);
}

TEST_CASE("regularity envelope grows with time") {
  const auto g = unit_grid(30);
  const auto u = field(g, [](const TraitPoint& x) { return 0.05 - x.squaredNorm(); }, 0.01);
  auto c = bracket(1.0, 1.0);
  c.K_bar_0 = 1.0;
  CHECK_FALSE(regularity_monitor(u, c, 0.0).envelope_passed);
  CHECK(regularity_monitor(u, c, 0.1).envelope_passed);
}
