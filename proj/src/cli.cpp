#include "concentra/cli.hpp"

#include "concentra/error.hpp"
#include "concentra/families.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace concentra {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

json point_json(const TraitPoint& p) {
  json a = json::array();
  for (int i = 0; i < p.size(); ++i) a.push_back(num(p[i]));
  return a;
}

CheckReport check(std::string name, double value, double threshold, bool verdict, std::string window) {
  CheckReport r;
  r.check_name = std::move(name);
  r.value = value;
  r.threshold = threshold;
  r.verdict = verdict;
  r.window = std::move(window);
  return r;
}

CheckReport info(std::string name, double value, std::string window) {
  CheckReport r = check(std::move(name), value, kNaN, true, std::move(window));
  r.informational = true;
  return r;
}

std::string layer_window(double t_layer) { return "t >= " + fmt(t_layer); }

double initial_macro(const GrowthModel& model, const DensityField& density) {
  if (const auto* g = std::get_if<GlobalInteractionModel>(&model))
    return g->weight ? integrate(density, g->weight) : integrate(density);
  return integrate(density);
}

/// Peak density in the cell of nodes strictly closer to bump k than to any other center.
std::vector<double> bump_peaks(const DensityField& density, const std::vector<QuadraticBump>& u0) {
  std::vector<double> peaks(u0.size(), 0.0);
  const auto& grid = density.grid;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const TraitPoint x = grid.node(n);
    std::size_t best = 0;
    double d0 = std::numeric_limits<double>::infinity(), d1 = d0;
    for (std::size_t k = 0; k < u0.size(); ++k) {
      const double dist = (x - u0[k].center).squaredNorm();
      if (dist < d0) {
        d1 = d0;
        d0 = dist;
        best = k;
      } else if (dist < d1) {
        d1 = dist;
      }
    }
    if (u0.size() > 1 && d1 - d0 <= 1e-12 * (1.0 + d0)) continue;
    peaks[best] = std::max(peaks[best], density.values[n]);
  }
  return peaks;
}

std::vector<CanonicalRun> integrate_bumps(const Scenario& s, const GrowthModel& model,
                                          ClosureMode closure,
                                          const std::optional<ConcentrationTrajectory>& pde,
                                          std::vector<std::string>& warnings) {
  std::vector<CanonicalRun> runs;
  ClosureMode mode = closure;
  if (mode == ClosureMode::FromPde && s.u0.size() > 1) {
    mode = ClosureMode::Frozen;
    warnings.push_back("from_pde closure follows a single maximum; bumps use the frozen closure");
  }
  for (const auto& b : s.u0) {
    CanonicalRun run;
    run.x0 = b.center;
    run.closure = mode;
    HessianClosure hc;
    hc.mode = mode;
    hc.initial_hessian = -2.0 * b.form;
    try {
      if (mode == ClosureMode::FromPde) {
        if (!pde) throw ConfigError("from_pde closure requires a PDE run directory");
        hc.feed = HessianFeed::from_trajectory(*pde);
        if (hc.feed->times.empty())
          throw SingularClosureError("the PDE run recorded no finite Hessian at the maximum");
      }
      run.result = integrate_canonical(b.center, hc, model, s.canonical.dt, s.canonical.T, s.box());
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      run.error = e.what();
      warnings.push_back("canonical integration from " + format_point(b.center) + " failed: " + e.what());
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

void canonical_checks(const Scenario& s, const GrowthModel& model, const std::vector<CanonicalRun>& runs,
                      const std::optional<Attractor>& attractor, std::vector<CheckReport>& checks) {
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (!runs[k].result) continue;
    const auto& traj = runs[k].result->trajectory;
    const std::string tag = runs.size() > 1 ? "[" + std::to_string(k) + "]" : "";
    const auto res = constraint_residual(traj, model, 0.0);
    checks.push_back(check("canonical_constraint_residual" + tag, res.max_all, 1e-10,
                           res.max_all <= 1e-10, "all"));
    if (std::holds_alternative<GlobalInteractionModel>(model)) {
      const double mono = monotonicity_violation(traj.macros());
      checks.push_back(check("canonical_macro_monotone" + tag, mono, -1e-10, mono >= -1e-10, "all"));
    } else {
      const auto& m = std::get<LocalCompetitionModel>(model);
      try {
        const auto p = persistence_envelope(traj, m);
        checks.push_back(check("canonical_persistence" + tag, p.K, std::numeric_limits<double>::infinity(),
                               std::isfinite(p.K) && p.r_positive, "all"));
      } catch (const Error& e) {
        checks.push_back(check("canonical_persistence" + tag, kNaN, kNaN, false, e.what()));
      }
      const auto ly = lyapunov_local(traj, m);
      checks.push_back(check("canonical_lyapunov" + tag, ly.applicable ? ly.worst_increment : kNaN, -1e-8,
                             ly.passed(1e-8), ly.applicable ? "all" : "kernel not symmetric"));
    }
    if (attractor && attractor->found && !traj.empty()) {
      const auto& last = traj.samples.back();
      const double dx = (last.x_bar - attractor->point).norm();
      const double dm = std::abs(last.macro - attractor->macro);
      const std::string w = "t = " + fmt(last.t);
      checks.push_back(check("canonical_attractor_distance" + tag, dx, 1e-6, dx <= 1e-6, w));
      checks.push_back(check("canonical_attractor_macro" + tag, dm, 1e-6, dm <= 1e-6, w));
    }
  }
  (void)s;
}

json attractor_json(const std::optional<Attractor>& a) {
  if (!a) return nullptr;
  return {{"found", a->found},
          {"point", a->found ? point_json(a->point) : json(nullptr)},
          {"macro", num(a->macro)},
          {"diagnostic", a->diagnostic}};
}

json canonical_json(const std::vector<CanonicalRun>& runs) {
  json out = json::array();
  for (const auto& r : runs) {
    json e = {{"x0", point_json(r.x0)}, {"closure", to_string(r.closure)}, {"error", r.error}};
    if (r.result && !r.result->trajectory.empty()) {
      const auto& last = r.result->trajectory.samples.back();
      e["samples"] = r.result->trajectory.size();
      e["final_time"] = last.t;
      e["final_point"] = point_json(last.x_bar);
      e["final_macro"] = num(last.macro);
      e["exit_time"] = r.result->exit_time ? json(*r.result->exit_time) : json(nullptr);
    }
    out.push_back(e);
  }
  return out;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot write " + file.string());
  os << text;
  if (!os) throw Error("failed writing " + file.string());
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

/// Creates `dir` fresh; removes it again if `body` throws.
template <class F>
void with_artifact_dir(const fs::path& dir, F&& body) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  try {
    body();
  } catch (...) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }
}

std::vector<std::string> hessian_columns(int d) {
  if (d == 1) return {"H_11"};
  return {"H_11", "H_12", "H_22"};
}

void put_hessian(std::ostream& os, const TraitMatrix& h, int d) {
  const bool ok = h.rows() == d && h.cols() == d;
  auto at = [&](int i, int j) { return ok ? h(i, j) : kNaN; };
  if (d == 1) {
    os << ',' << fmt(at(0, 0));
  } else {
    os << ',' << fmt(at(0, 0)) << ',' << fmt(at(0, 1)) << ',' << fmt(at(1, 1));
  }
}

}  // namespace

fs::path artifact_dir(const Scenario& scenario, const fs::path& root, const std::string& suffix) {
  return root / (scenario.name + "_" + scenario.hash().substr(0, 12) + suffix);
}

const CheckReport* RunAnalysis::find_check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.check_name == name) return &c;
  return nullptr;
}

RunAnalysis analyze_run(const Scenario& s) {
  RunAnalysis a;
  a.scenario = s;
  const TraitGrid grid = s.build_grid();
  const GrowthModel model = s.build_model();
  const DiffusionCoefficient diffusion = s.build_diffusion();
  const Box box = s.box();
  const double eps = s.config.epsilon;

  const double mass_c = mass_constant(grid, s.u0, eps, s.config.mass_target);
  const DensityField n0 = init_density(grid, s.u0, eps, s.config.mass_target);
  const double I0 = initial_macro(model, n0);
  a.constants = derive_constants(s, model, mass_c, I0);

  if (s.diagnostics.assumptions) {
    InitialProfile init = initial_profile(s.u0, eps, mass_c, I0);
    init.initial_mass = integrate(n0);
    const int samples = s.diagnostics.samples;
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
      a.assumptions = s.config.variant == ModelVariant::VariableDiffusion
                          ? check_assumptions(*g, diffusion, a.constants, box, samples, &init)
                          : check_assumptions(*g, a.constants, box, samples, &init);
    } else {
      a.assumptions = check_assumptions(std::get<LocalCompetitionModel>(model), a.constants, box, samples, &init);
    }
    for (const auto& w : a.assumptions->warnings) a.warnings.push_back("assumption: " + w);
  }

  ProbeOptions probes;
  probes.steps = s.probes.steps;
  probes.multi_max = s.probes.multi_max;
  if (s.diagnostics.regularity) probes.constants = a.constants;
  a.pde = run_simulation(s.config, model, diffusion, grid, s.u0, probes);
  for (const auto& w : a.pde.warnings) a.warnings.push_back(w);

  const double t_layer = s.diagnostics.t_layer;
  const std::string window = layer_window(t_layer);
  const auto& ser = a.pde.series;

  a.residual_all = 0.0;
  a.residual_post_layer = 0.0;
  std::vector<double> post;
  for (std::size_t k = 0; k < ser.size(); ++k) {
    a.residual_all = std::max(a.residual_all, a.pde.residual_R[k]);
    if (ser.times[k] >= t_layer - 1e-12) {
      a.residual_post_layer = std::max(a.residual_post_layer, a.pde.residual_R[k]);
      post.push_back(ser.I[k]);
    }
  }
  a.monotonicity = post.size() >= 2 ? monotonicity_violation(post) : kNaN;
  const double i_max_seen = *std::max_element(ser.I.begin(), ser.I.end());
  a.excess_constant = (i_max_seen - a.constants.I_M) / (eps * eps);

  a.checks.push_back(info("pde_constraint_residual", a.residual_post_layer, window));
  a.checks.push_back(info("pde_constraint_residual_all", a.residual_all, "all"));
  a.checks.push_back(check("pde_macro_monotone", a.monotonicity, -1e-3, a.monotonicity >= -1e-3, window));
  a.checks.push_back(info("pde_macro_total_variation", total_variation(ser.I), "all"));
  if (std::holds_alternative<GlobalInteractionModel>(model)) {
    a.checks.push_back(check("pde_macro_upper_bound", i_max_seen, a.constants.I_M + 0.1,
                             i_max_seen <= a.constants.I_M + 0.1, "all"));
    a.checks.push_back(info("pde_macro_excess_constant", a.excess_constant, "all"));
  } else {
    const double rho_max = *std::max_element(ser.rho.begin(), ser.rho.end());
    a.checks.push_back(check("pde_mass_upper_bound", rho_max, a.constants.rho_M + 0.05,
                             rho_max <= a.constants.rho_M + 0.05, "all"));
  }
  {
    double worst = 0.0;
    for (std::size_t k = 0; k < ser.size(); ++k)
      worst = std::max(worst, ser.rho[k] > 0.0 ? ser.boundary_mass[k] / ser.rho[k] : 0.0);
    a.checks.push_back(check("pde_boundary_mass_fraction", worst, 1e-8, worst <= 1e-8, "all"));
  }
  {
    const double lo = -2.0 * a.constants.L_under_1, hi = -2.0 * a.constants.L_bar_1;
    double excursion = 0.0;
    for (int step : s.probes.steps) {
      const auto& h = a.pde.trajectory.samples.at(static_cast<std::size_t>(step)).hessian;
      if (!h.allFinite()) {
        excursion = kNaN;
        break;
      }
      Eigen::SelfAdjointEigenSolver<TraitMatrix> es(h);
      excursion = std::max({excursion, lo - es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff() - hi});
    }
    a.checks.push_back(check("pde_hessian_bracket", excursion, 0.5, excursion <= 0.5, "probe steps"));
  }
  for (const auto& p : a.pde.probes) {
    if (!p.regularity) continue;
    const auto& r = *p.regularity;
    const std::string w = "step " + std::to_string(p.step);
    a.checks.push_back(check("regularity_envelope@" + std::to_string(p.step), r.envelope_margin, 0.0,
                             r.envelope_passed, w));
    a.checks.push_back(check("regularity_hessian@" + std::to_string(p.step), r.hessian_min_eig,
                             r.hessian_lower_bound, r.hessian_passed, w));
  }

  try {
    a.attractor = long_time_attractor(model, box);
  } catch (const Error& e) {
    a.attractor = Attractor{};
    a.attractor->diagnostic = e.what();
  }

  if (s.diagnostics.canonical) {
    a.canonical = integrate_bumps(s, model, s.canonical.closure, a.pde.trajectory, a.warnings);
    canonical_checks(s, model, a.canonical, a.attractor, a.checks);
    a.sup_distance = kNaN;
    if (!a.canonical.empty() && a.canonical.front().result && !a.canonical.front().result->trajectory.empty()) {
      try {
        a.sup_distance = compare_trajectories(a.pde.trajectory, a.canonical.front().result->trajectory).sup_distance;
      } catch (const ValidationError&) {
      }
    }
    a.checks.push_back(check("pde_vs_canonical_distance", a.sup_distance, 5.0 * grid.min_spacing(),
                             a.sup_distance <= 5.0 * grid.min_spacing(), "common range"));
  } else {
    a.sup_distance = kNaN;
  }

  if (const auto* g = std::get_if<GlobalInteractionModel>(&model); g && s.u0.size() > 1) {
    std::vector<TraitPoint> centers;
    for (const auto& b : s.u0) centers.push_back(b.center);
    try {
      a.bumps = mark_dominated(centers, *g);
    } catch (const Error& e) {
      a.warnings.push_back(std::string("bump dominance unavailable: ") + e.what());
    }
  }
  if (s.u0.size() > 1) {
    const auto peaks = bump_peaks(a.pde.final_state.density, s.u0);
    const double hi = *std::max_element(peaks.begin(), peaks.end());
    const double lo = *std::min_element(peaks.begin(), peaks.end());
    a.checks.push_back(info("pde_bump_peak_ratio", lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity(),
                            "final step"));
  }
  return a;
}

void write_series_csv(std::ostream& os, const SimulationResult& r) {
  const int d = r.trajectory.empty() ? 2 : static_cast<int>(r.trajectory.samples.front().x_bar.size());
  os << "t,I,rho,J";
  for (int i = 0; i < d; ++i) os << ",xbar_" << i + 1;
  for (const auto& c : hessian_columns(d)) os << ',' << c;
  os << ",residual_R,boundary_mass\n";
  for (std::size_t k = 0; k < r.series.size(); ++k) {
    const auto& s = r.trajectory.samples[k];
    os << fmt(r.series.times[k]) << ',' << fmt(r.series.I[k]) << ',' << fmt(r.series.rho[k]) << ','
       << fmt(r.series.J[k]);
    for (int i = 0; i < d; ++i) os << ',' << fmt(s.x_bar[i]);
    put_hessian(os, s.hessian, d);
    os << ',' << fmt(r.residual_R[k]) << ',' << fmt(r.series.boundary_mass[k]) << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const std::vector<const ConcentrationTrajectory*>& trajs) {
  int d = 0;
  for (const auto* t : trajs)
    if (!t->empty()) d = static_cast<int>(t->samples.front().x_bar.size());
  if (d == 0) d = 2;
  os << "source,t";
  for (int i = 0; i < d; ++i) os << ",xbar_" << i + 1;
  os << ",macro";
  for (const auto& c : hessian_columns(d)) os << ',' << c;
  os << '\n';
  for (const auto* t : trajs)
    for (const auto& s : t->samples) {
      os << t->source << ',' << fmt(s.t);
      for (int i = 0; i < d; ++i) os << ',' << fmt(s.x_bar[i]);
      os << ',' << fmt(s.macro);
      put_hessian(os, s.hessian, d);
      os << '\n';
    }
}

ConcentrationTrajectory read_trajectory_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("trajectory file is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int d = 0;
  for (const auto& h : header)
    if (h.rfind("xbar_", 0) == 0) ++d;
  if (d < 1 || d > 2 || header.size() != static_cast<std::size_t>(3 + d + (d == 1 ? 1 : 3)))
    throw ConfigError("trajectory file has an unexpected header: " + line);
  ConcentrationTrajectory traj;
  traj.source = source;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw ConfigError("malformed trajectory row: " + line);
    if (cells[0] != source) continue;
    auto val = [&](std::size_t i) { return std::strtod(cells[i].c_str(), nullptr); };
    TrajectorySample s;
    s.t = val(1);
    s.x_bar = TraitPoint(d);
    for (int i = 0; i < d; ++i) s.x_bar[i] = val(2 + i);
    s.macro = val(2 + d);
    s.hessian = TraitMatrix(d, d);
    if (d == 1) {
      s.hessian(0, 0) = val(3 + d);
    } else {
      s.hessian(0, 0) = val(3 + d);
      s.hessian(0, 1) = s.hessian(1, 0) = val(4 + d);
      s.hessian(1, 1) = val(5 + d);
    }
    traj.push(std::move(s));
  }
  if (traj.empty()) throw ConfigError("trajectory file has no rows with source " + source);
  return traj;
}

void write_run_artifacts(const RunAnalysis& a, const fs::path& dir) {
  const auto& s = a.scenario;
  json manifest = {{"scenario", s.to_json()},
                   {"scenario_hash", s.hash()},
                   {"run", a.pde.manifest},
                   {"constants", to_json(a.constants)},
                   {"assumptions", a.assumptions ? to_json(*a.assumptions) : json(nullptr)},
                   {"weight", "psi = 1 unless the model family defines a weight"},
                   {"box", {{"lower", s.grid.lower}, {"upper", s.grid.upper}}},
                   {"root_tolerance", kRootTol},
                   {"bracket_margin", kBracketMargin},
                   {"density_floor", kDensityFloor},
                   {"resolved_window", kResolvedWindow},
                   {"warnings", a.warnings}};
  write_json(dir / "manifest.json", manifest);
  {
    std::ostringstream os;
    write_series_csv(os, a.pde);
    write_text(dir / "series.csv", os.str());
  }
  {
    std::vector<const ConcentrationTrajectory*> trajs{&a.pde.trajectory};
    for (const auto& c : a.canonical)
      if (c.result) trajs.push_back(&c.result->trajectory);
    std::ostringstream os;
    write_trajectory_csv(os, trajs);
    write_text(dir / "trajectory.csv", os.str());
  }
  for (const auto& snap : a.pde.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06d.csv", snap.step);
    std::ostringstream os;
    write_field_csv(os, snap.density);
    write_text(dir / name, os.str());
  }

  json reports;
  reports["checks"] = json::array();
  for (const auto& c : a.checks) reports["checks"].push_back(to_json(c));
  reports["probes"] = json::array();
  for (const auto& p : a.pde.probes) {
    json maxima = json::array();
    for (const auto& m : p.maxima)
      maxima.push_back({{"point", point_json(m.point)}, {"value", num(m.value)}, {"on_boundary", m.on_boundary}});
    reports["probes"].push_back({{"step", p.step},
                                 {"time", p.time},
                                 {"maxima", maxima},
                                 {"regularity", p.regularity ? to_json(*p.regularity) : json(nullptr)}});
  }
  reports["bumps"] = json::array();
  {
    const auto peaks = s.u0.size() > 1 ? bump_peaks(a.pde.final_state.density, s.u0) : std::vector<double>{};
    for (std::size_t k = 0; k < a.bumps.size(); ++k)
      reports["bumps"].push_back({{"x0", point_json(a.bumps[k].x0)},
                                  {"macro", num(a.bumps[k].macro)},
                                  {"dominated", a.bumps[k].dominated},
                                  {"final_peak_density", k < peaks.size() ? num(peaks[k]) : json(nullptr)}});
  }
  reports["attractor"] = attractor_json(a.attractor);
  reports["canonical"] = canonical_json(a.canonical);
  reports["summary"] = {{"t_layer", s.diagnostics.t_layer},
                        {"residual_post_layer", num(a.residual_post_layer)},
                        {"residual_all", num(a.residual_all)},
                        {"sup_distance", num(a.sup_distance)},
                        {"monotonicity", num(a.monotonicity)},
                        {"excess_constant", num(a.excess_constant)},
                        {"reaction_advisory", num(a.pde.reaction_advisory)}};
  reports["warnings"] = a.warnings;
  write_json(dir / "reports.json", reports);
}

CanonicalAnalysis analyze_canonical(const Scenario& s, ClosureMode closure,
                                    const std::optional<ConcentrationTrajectory>& pde) {
  if (closure == ClosureMode::FromPde && !pde)
    throw ConfigError("from_pde closure requires --pde-dir with the trajectory of a previous run");
  CanonicalAnalysis a;
  a.scenario = s;
  const GrowthModel model = s.build_model();
  std::vector<std::string> warnings;
  a.runs = integrate_bumps(s, model, closure, pde, warnings);
  try {
    a.attractor = long_time_attractor(model, s.box());
  } catch (const Error& e) {
    a.attractor = Attractor{};
    a.attractor->diagnostic = e.what();
  }
  canonical_checks(s, model, a.runs, a.attractor, a.checks);
  for (const auto& r : a.runs) {
    if (!r.result || r.result->trajectory.size() < 2) continue;
    const auto& t = r.result->trajectory.samples;
    const TraitPoint v = (t[1].x_bar - t[0].x_bar) / (t[1].t - t[0].t);
    CheckReport c = info("canonical_initial_speed", v.norm(), "first step");
    a.checks.push_back(c);
  }
  return a;
}

void write_canonical_artifacts(const CanonicalAnalysis& a, const fs::path& dir) {
  write_json(dir / "manifest.json", {{"scenario", a.scenario.to_json()}, {"scenario_hash", a.scenario.hash()}});
  std::vector<const ConcentrationTrajectory*> trajs;
  for (const auto& r : a.runs)
    if (r.result) trajs.push_back(&r.result->trajectory);
  std::ostringstream os;
  write_trajectory_csv(os, trajs);
  write_text(dir / "trajectory.csv", os.str());
  json reports;
  reports["checks"] = json::array();
  for (const auto& c : a.checks) reports["checks"].push_back(to_json(c));
  reports["attractor"] = attractor_json(a.attractor);
  reports["canonical"] = canonical_json(a.runs);
  for (std::size_t k = 0; k < a.runs.size(); ++k) {
    const auto& r = a.runs[k];
    if (!r.result || r.result->trajectory.size() < 2) continue;
    const auto& t = r.result->trajectory.samples;
    reports["canonical"][k]["initial_velocity"] = point_json((t[1].x_bar - t[0].x_bar) / (t[1].t - t[0].t));
  }
  write_json(dir / "reports.json", reports);
}

unsigned worker_limit() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONCENTRA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

std::vector<SweepRow> run_sweep(const Scenario& scenario, std::vector<double> eps, const fs::path& root,
                                unsigned threads, std::vector<std::string>* warnings) {
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const auto before = eps.size();
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  if (warnings && eps.size() != before)
    warnings->push_back("duplicate epsilon values removed (" + std::to_string(before - eps.size()) + ")");
  if (eps.size() < 2) throw ConfigError("sweep needs at least two distinct epsilon values");
  for (double e : eps)
    if (!(e > 0.0) || !std::isfinite(e)) throw ValidationError("epsilon", "values must be positive");

  std::vector<SweepRow> rows(eps.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < eps.size(); k = next++) {
      SweepRow& row = rows[k];
      row.epsilon = eps[k];
      try {
        json j = scenario.to_json();
        j["config"]["epsilon"] = eps[k];
        const Scenario sub = Scenario::from_json(j);
        const fs::path dir = artifact_dir(sub, root);
        const RunAnalysis a = analyze_run(sub);
        with_artifact_dir(dir, [&] { write_run_artifacts(a, dir); });
        row.ok = true;
        row.residual_post_layer = a.residual_post_layer;
        row.sup_distance = a.sup_distance;
        row.monotonicity = a.monotonicity;
        row.excess_constant = a.excess_constant;
        row.dir = dir.filename().string();
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.residual_post_layer = row.sup_distance = row.monotonicity = row.excess_constant = kNaN;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(eps.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "epsilon,status,residual_post_layer,sup_distance,monotonicity_violation,excess_constant,artifact_dir,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << fmt(r.epsilon) << ',' << (r.ok ? "ok" : "failed") << ',' << fmt(r.residual_post_layer) << ','
       << fmt(r.sup_distance) << ',' << fmt(r.monotonicity) << ',' << fmt(r.excess_constant) << ',' << r.dir
       << ',' << err << '\n';
  }
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: invalid " << e.path() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace

int command_run(const fs::path& file, const fs::path& root, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(file);
    const fs::path dir = artifact_dir(s, root);
    const RunAnalysis a = analyze_run(s);
    with_artifact_dir(dir, [&] { write_run_artifacts(a, dir); });
    for (const auto& w : a.warnings) err << "warning: " << w << '\n';
    out << dir.string() << '\n';
    return kExitOk;
  });
}

int command_sweep(const fs::path& file, const std::vector<double>& epsilons, const fs::path& root,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(file);
    std::vector<std::string> warnings;
    const auto rows = run_sweep(s, epsilons, root, worker_limit(), &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    const fs::path dir = artifact_dir(s, root, "_sweep");
    fs::create_directories(dir);
    std::ostringstream os;
    write_sweep_csv(os, rows);
    write_text(dir / "sweep.csv", os.str());
    out << dir.string() << '\n';
    bool ok = true;
    for (const auto& r : rows)
      if (!r.ok) {
        ok = false;
        err << "sub-run epsilon=" << fmt(r.epsilon) << " failed: " << r.error << '\n';
      }
    return ok ? kExitOk : kExitNumerical;
  });
}

int command_canonical(const fs::path& file, const std::string& closure, const std::optional<fs::path>& pde_dir,
                      const fs::path& root, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(file);
    const ClosureMode mode = parse_closure(closure);
    std::optional<ConcentrationTrajectory> pde;
    if (mode == ClosureMode::FromPde) {
      if (!pde_dir) throw ConfigError("from_pde closure requires --pde-dir");
      std::ifstream in(*pde_dir / "trajectory.csv");
      if (!in) throw ConfigError("cannot open " + (*pde_dir / "trajectory.csv").string());
      pde = read_trajectory_csv(in, "pde");
    }
    const CanonicalAnalysis a = analyze_canonical(s, mode, pde);
    for (const auto& r : a.runs)
      if (!r.error.empty()) throw SolverError("canonical integration failed: " + r.error, kNaN);
    const fs::path dir = artifact_dir(s, root, "_canonical_" + to_string(mode));
    with_artifact_dir(dir, [&] { write_canonical_artifacts(a, dir); });
    out << dir.string() << '\n';
    return kExitOk;
  });
}

int command_check(const fs::path& file, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario s = load_scenario(file);
    const TraitGrid grid = s.build_grid();
    const GrowthModel model = s.build_model();
    const double mass_c = mass_constant(grid, s.u0, s.config.epsilon, s.config.mass_target);
    const DensityField n0 = init_density(grid, s.u0, s.config.epsilon, s.config.mass_target);
    const double I0 = initial_macro(model, n0);
    const AssumptionConstants c = derive_constants(s, model, mass_c, I0);
    InitialProfile init = initial_profile(s.u0, s.config.epsilon, mass_c, I0);
    init.initial_mass = integrate(n0);
    AssumptionReport report;
    if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
      report = s.config.variant == ModelVariant::VariableDiffusion
                   ? check_assumptions(*g, s.build_diffusion(), c, s.box(), s.diagnostics.samples, &init)
                   : check_assumptions(*g, c, s.box(), s.diagnostics.samples, &init);
    } else {
      report = check_assumptions(std::get<LocalCompetitionModel>(model), c, s.box(), s.diagnostics.samples, &init);
    }
    json j = {{"scenario", s.to_json()}, {"constants", to_json(c)}, {"assumptions", to_json(report)}};
    out << j.dump(2) << '\n';
    return kExitOk;
  });
}

}  // namespace concentra
