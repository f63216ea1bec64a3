#include "concentra/canonical.hpp"
#include "concentra/diagnostics.hpp"
#include "concentra/error.hpp"
#include "concentra/families.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace concentra;

namespace {

TraitGrid unit_grid(int n) { return build_grid(2, make_point(0.0, 0.0), make_point(1.0, 1.0), {n, n}); }

SimulationState state_of(const DensityField& n, double t = 0.0) {
  SimulationState s;
  s.density = n;
  s.time = t;
  return s;
}

ConcentrationTrajectory constant_traj(const TraitPoint& x, double t0, double t1, int samples) {
  ConcentrationTrajectory t;
  for (int k = 0; k < samples; ++k)
    t.push({t0 + (t1 - t0) * k / (samples - 1), x, 1.0, TraitMatrix::Identity(x.size(), x.size())});
  return t;
}

}  // namespace

TEST_CASE("macro_series closed forms") {
  const auto g = unit_grid(100);
  const auto model = make_global_family("affine", {{"a0", 2.0}, {"slope", {-1.0, -1.0}}}, g.box());
  const DensityField zero(g, std::vector<double>(g.size(), 0.0));
  const auto s0 = macro_series({state_of(zero)}, model, 0.005);
  CHECK(s0.I[0] == 0.0);
  CHECK(s0.rho[0] == 0.0);
  CHECK(s0.J[0] == 0.0);

  TraitMatrix form = TraitMatrix::Identity(2, 2) * 2.4;
  const auto n = init_density(g, {{make_point(0.5, 0.5), form, 1.0}}, 0.005, 0.3);
  const auto s = macro_series({state_of(n), state_of(n, 0.01)}, model, 0.005);
  CHECK(s.rho[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(s.I[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(s.boundary_mass[0] <= 1e-30);
  s.validate();

  const auto flat = make_global_family("affine", {{"a0", 0.0}, {"kappa", 0.0}}, g.box());
  const auto sj = macro_series({state_of(n)}, flat, 0.005);
  CHECK(sj.J[0] == 0.0);
}

TEST_CASE("total_variation examples") {
  CHECK(total_variation({0.0, 1.0, 2.0}) == 2.0);
  CHECK(total_variation({3.0, 3.0, 3.0}) == 0.0);
  CHECK(total_variation({0.0, 1.0, 0.0}) == 2.0);
}

TEST_CASE("property: total variation invariances") {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(20), b(15);
    for (auto& v : a) v = U(gen);
    for (auto& v : b) v = U(gen);
    const double tv = total_variation(a);
    std::vector<double> shifted = a, reversed(a.rbegin(), a.rend());
    for (auto& v : shifted) v += 0.37;
    CHECK(std::abs(total_variation(shifted) - tv) <= 1e-14 * a.size());
    CHECK(std::abs(total_variation(reversed) - tv) <= 1e-14);
    std::vector<double> joined = a;
    joined.insert(joined.end(), b.begin(), b.end());
    CHECK(total_variation(joined) <= tv + total_variation(b) + std::abs(b.front() - a.back()) + 1e-14);
    CHECK(total_variation(joined) == doctest::Approx(tv + total_variation(b) + std::abs(b.front() - a.back())));
    std::vector<double> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(total_variation(sorted) == doctest::Approx(sorted.back() - sorted.front()).epsilon(1e-14));
  }
}

TEST_CASE("monotonicity_violation examples") {
  CHECK(monotonicity_violation({0.0, 1.0, 3.0}) == 1.0);
  CHECK(monotonicity_violation({2.0, 2.0, 2.0}) == 0.0);
  CHECK(monotonicity_violation({0.0, 1.0, 0.5}) == -0.5);
  CHECK(monotonicity_violation({1.0}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("constraint residual along a canonical trajectory") {
  const Box box{make_point(-1.0, -1.0), make_point(1.0, 1.0)};
  const auto q = make_global_family("quadratic", {{"k0", 1.0}}, box);
  TraitMatrix h = TraitMatrix::Identity(2, 2) * -2.0;
  const auto res = integrate_canonical(make_point(0.5, 0.5), {ClosureMode::Frozen, h, std::nullopt}, q, 0.01, 2.0);
  const auto r = constraint_residual(res.trajectory, q, 0.1);
  CHECK(r.max_all <= kRootTol);
  CHECK(r.max_post_layer <= r.max_all);
  CHECK(r.times.size() == res.trajectory.size());

  const auto l = make_local_family("logistic", {{"r0", 1.0}, {"s", 1.0}}, box);
  const auto lres = integrate_canonical(make_point(0.5, 0.5), {ClosureMode::Frozen, h, std::nullopt}, l, 0.01, 2.0);
  CHECK(constraint_residual(lres.trajectory, l, 0.0).max_all <= 1e-14);
}

TEST_CASE("constraint residual with a vanishing rate is zero") {
  const auto g = unit_grid(10);
  const auto flat = make_global_family("affine", {{"a0", 0.0}, {"kappa", 0.0}}, g.box());
  MacroSeries s;
  ConcentrationTrajectory t;
  for (int k = 0; k < 5; ++k) {
    s.push(0.1 * k, 0.3, 0.3, 0.0, 0.0);
    t.push({0.1 * k, make_point(0.2 * k, 0.5), 0.3, TraitMatrix::Identity(2, 2)});
  }
  const auto r = constraint_residual(s, t, flat, 0.0);
  CHECK(r.max_all == 0.0);
  CHECK(r.max_post_layer == 0.0);
  s.push(0.5, 0.3, 0.3, 0.0, 0.0);
  CHECK_THROWS_AS(constraint_residual(s, t, flat, 0.0), ValidationError);
}

TEST_CASE("post-layer statistics skip the initial layer") {
  const auto g = unit_grid(10);
  const auto m = make_global_family("affine", {{"a0", 1.0}}, g.box());
  MacroSeries s;
  ConcentrationTrajectory t;
  const std::vector<double> I{0.2, 0.9, 1.0, 1.0};
  for (int k = 0; k < 4; ++k) {
    s.push(0.1 * k, I[k], 1.0, 0.0, 0.0);
    t.push({0.1 * k, make_point(0.5, 0.5), I[k], TraitMatrix::Identity(2, 2)});
  }
  const auto r = constraint_residual(s, t, m, 0.15);
  CHECK(r.max_all == doctest::Approx(0.8));
  CHECK(r.max_post_layer == doctest::Approx(0.0));
  CHECK(r.t_layer == 0.15);
}

TEST_CASE("compare_trajectories examples") {
  const auto a = constant_traj(make_point(0.2, 0.3), 0.0, 1.0, 11);
  CHECK(compare_trajectories(a, a).sup_distance == 0.0);
  const auto b = constant_traj(make_point(0.3, 0.3), 0.0, 1.0, 7);
  CHECK(compare_trajectories(a, b).sup_distance == doctest::Approx(0.1).epsilon(1e-14));
  const auto late = constant_traj(make_point(0.2, 0.3), 2.0, 3.0, 3);
  CHECK_THROWS_AS(compare_trajectories(a, late), ValidationError);

  ConcentrationTrajectory moving;
  moving.push({0.0, make_point(0.0, 0.0), 1.0, TraitMatrix::Identity(2, 2)});
  moving.push({1.0, make_point(1.0, 0.0), 1.0, TraitMatrix::Identity(2, 2)});
  CHECK(interpolate_position(moving, 0.25)[0] == doctest::Approx(0.25));
  CHECK(interpolate_position(moving, -5.0)[0] == 0.0);
  const auto partial = constant_traj(make_point(0.0, 0.0), 0.5, 2.0, 4);
  const auto cmp = compare_trajectories(moving, partial);
  CHECK(cmp.sup_distance == doctest::Approx(1.0));
  CHECK(cmp.times.front() == doctest::Approx(0.5));
  CHECK(cmp.times.back() == doctest::Approx(1.0));
}

TEST_CASE("check reports serialize verdicts") {
  CheckReport r{"residual", 0.01, 0.1, true, "t >= 0.1"};
  auto j = to_json(r);
  CHECK(j["check_name"] == "residual");
  CHECK(j["verdict"] == "pass");
  CHECK(j["window"] == "t >= 0.1");
  r.verdict = false;
  CHECK(to_json(r)["verdict"] == "fail");
  r.informational = true;
  CHECK(to_json(r)["verdict"] == "info");
  r.value = std::nan("");
  CHECK(to_json(r)["value"] == "nan");
}

TEST_CASE("series containers enforce their invariants") {
  ConcentrationTrajectory t;
  t.push({0.0, make_point(0.1), 1.0, TraitMatrix::Identity(1, 1)});
  CHECK_THROWS_AS(t.push({0.0, make_point(0.1), 1.0, TraitMatrix::Identity(1, 1)}), ValidationError);
  CHECK_THROWS_AS(t.push({1.0, make_point(0.1), -1.0, TraitMatrix::Identity(1, 1)}), ValidationError);
  MacroSeries s;
  s.push(0.0, 0.0, 0.0, 0.0, 0.0);
  s.push(0.0, 0.0, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(s.validate(), ValidationError);
}
