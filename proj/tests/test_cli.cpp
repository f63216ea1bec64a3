#include "concentra/cli.hpp"
#include "concentra/error.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace concentra;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scenarios_dir() {
  if (const char* env = std::getenv("CONCENTRA_SCENARIOS")) return env;
  return fs::path(__FILE__).parent_path().parent_path() / "scenarios";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("concentra_" + tag + "_" + std::to_string(std::rand()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json small_scenario() {
  return {{"name", "small_concave"},
          {"model", {{"kind", "global"}, {"family", "quadratic"}, {"params", {{"k0", 1.0}}}}},
          {"grid", {{"dimension", 2}, {"lower", {-1.0, -1.0}}, {"upper", {1.0, 1.0}}, {"points_per_axis", 32}}},
          {"config", {{"epsilon", 0.02}, {"dt", 0.01}, {"steps", 20}, {"snapshot_every", 10}, {"mass_target", 0.3}}},
          {"u0", {{{"center", {0.4, 0.2}}, {"form", 1.0}}}}};
}

fs::path write_scenario(const fs::path& dir, const json& j, const std::string& file = "s.json") {
  const fs::path p = dir / file;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string expect_validation(const json& j) {
  try {
    Scenario::from_json(j);
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("bundled scenarios validate and round-trip exactly") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(scenarios_dir())) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    const Scenario s = load_scenario(entry.path());
    const json j = s.to_json();
    const Scenario back = Scenario::from_json(j);
    CHECK_MESSAGE(back.to_json() == j, entry.path().string());
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.hash() == s.hash());
    CHECK(s.hash().size() == 40u);
  }
  CHECK(count >= 5);
}

TEST_CASE("defaults are resolved into the encoding") {
  const Scenario s = Scenario::from_json(small_scenario());
  const json j = s.to_json();
  CHECK(j["config"]["boundary"] == "no_flux");
  CHECK(j["config"]["model_variant"] == "global");
  CHECK(j["model"]["params"].contains("kappa"));
  CHECK(j["probes"]["steps"] == json({0, 10, 20}));
  CHECK(j["canonical"]["dt"] == 0.01);
  CHECK(j["diagnostics"]["t_layer"] == doctest::Approx(0.1));
  CHECK(j["u0"][0]["form"] == json({{1.0, 0.0}, {0.0, 1.0}}));
  CHECK(s.canonical.closure == ClosureMode::FromPde);
}

TEST_CASE("scenario validation names the offending field") {
  auto j = small_scenario();
  j["config"]["dt"] = 0.0;
  CHECK(expect_validation(j) == "config.dt");
  j = small_scenario();
  j["config"]["colour"] = 1;
  CHECK(expect_validation(j) == "config.colour");
  j = small_scenario();
  j["model"]["family"] = "cubic";
  CHECK(expect_validation(j).rfind("model", 0) == 0);
  j = small_scenario();
  j["u0"][0]["form"] = {{1.0, 2.0}, {2.0, 1.0}};
  CHECK(expect_validation(j) == "u0[0].form");
  j = small_scenario();
  j["grid"]["points_per_axis"] = 4;
  CHECK(expect_validation(j) == "grid.points_per_axis");
  j = small_scenario();
  j["probes"] = {{"steps", {0, 99}}};
  CHECK(expect_validation(j) == "probes.steps");
  j = small_scenario();
  j["constants"] = {{"K_bogus", 1.0}};
  CHECK(expect_validation(j) == "constants.K_bogus");
  j = small_scenario();
  j.erase("name");
  CHECK(expect_validation(j) == "name");
}

TEST_CASE("check command prints constants and assumptions") {
  TempDir tmp("check");
  std::ostringstream out, err;
  CHECK(command_check(write_scenario(tmp.path, small_scenario()), out, err) == kExitOk);
  const json j = json::parse(out.str());
  CHECK(j.contains("constants"));
  CHECK(j["constants"]["I_M"] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(j.contains("assumptions"));
  std::ostringstream o2, e2;
  CHECK(command_check(tmp.path / "missing.json", o2, e2) == kExitConfig);
  std::ofstream(tmp.path / "broken.json") << "{ not json";
  CHECK(command_check(tmp.path / "broken.json", o2, e2) == kExitConfig);
}

TEST_CASE("run command writes the artifact set deterministically") {
  TempDir tmp("run");
  const fs::path file = write_scenario(tmp.path, small_scenario());
  std::ostringstream out, err;
  REQUIRE(command_run(file, tmp.path / "a", out, err) == kExitOk);
  const Scenario s = load_scenario(file);
  const fs::path dir = artifact_dir(s, tmp.path / "a");
  CHECK(dir.filename().string() == "small_concave_" + s.hash().substr(0, 12));
  for (const char* f : {"manifest.json", "series.csv", "trajectory.csv", "reports.json", "snap_000000.csv",
                        "snap_000010.csv", "snap_000020.csv"})
    CHECK_MESSAGE(fs::exists(dir / f), f);

  const json manifest = read_json(dir / "manifest.json");
  CHECK(manifest["scenario"] == s.to_json());
  CHECK(manifest["run"]["config"]["epsilon"] == 0.02);
  CHECK(manifest["run"]["boundary"] == "no_flux");
  CHECK(manifest.contains("constants"));
  CHECK(manifest["assumptions"].is_object());

  const std::string header = slurp(dir / "series.csv").substr(0, 80);
  CHECK(header.rfind("t,I,rho,J,xbar_1,xbar_2,H_11,H_12,H_22,residual_R,boundary_mass", 0) == 0);
  const json reports = read_json(dir / "reports.json");
  CHECK(reports["checks"].is_array());
  CHECK(reports["probes"].size() == 3u);

  std::ostringstream out2, err2;
  REQUIRE(command_run(file, tmp.path / "b", out2, err2) == kExitOk);
  const fs::path dir2 = artifact_dir(s, tmp.path / "b");
  CHECK(slurp(dir / "series.csv") == slurp(dir2 / "series.csv"));
  CHECK(slurp(dir / "trajectory.csv") == slurp(dir2 / "trajectory.csv"));
}

TEST_CASE("run command exit codes") {
  TempDir tmp("exit");
  auto j = small_scenario();
  j["config"]["dt"] = -0.01;
  std::ostringstream out, err;
  CHECK(command_run(write_scenario(tmp.path, j), tmp.path, out, err) == kExitConfig);
  CHECK(err.str().find("config.dt") != std::string::npos);

  // a rate blowing up the reaction exponent is a numerical failure
  j = small_scenario();
  j["model"]["params"] = {{"k0", 400.0}};
  j["config"]["epsilon"] = 0.001;
  j["config"]["dt"] = 0.01;
  std::ostringstream out2, err2;
  const fs::path file = write_scenario(tmp.path, j, "blow.json");
  CHECK(command_run(file, tmp.path / "out", out2, err2) == kExitNumerical);
  CHECK_FALSE(fs::exists(artifact_dir(load_scenario(file), tmp.path / "out")));
}

TEST_CASE("trajectory csv round-trips") {
  TempDir tmp("traj");
  const fs::path file = write_scenario(tmp.path, small_scenario());
  std::ostringstream out, err;
  REQUIRE(command_run(file, tmp.path, out, err) == kExitOk);
  const Scenario s = load_scenario(file);
  const RunAnalysis a = analyze_run(s);
  std::ifstream in(artifact_dir(s, tmp.path) / "trajectory.csv");
  const auto back = read_trajectory_csv(in, "pde");
  REQUIRE(back.size() == a.pde.trajectory.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back.samples[k].t == a.pde.trajectory.samples[k].t);
    CHECK(back.samples[k].x_bar == a.pde.trajectory.samples[k].x_bar);
    CHECK(back.samples[k].macro == a.pde.trajectory.samples[k].macro);
  }
  std::istringstream bad("source,t\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad, "pde"), ConfigError);
}

TEST_CASE("sweep runs every epsilon and sorts the table") {
  TempDir tmp("sweep");
  const Scenario s = Scenario::from_json(small_scenario());
  std::vector<std::string> warnings;
  const auto rows = run_sweep(s, {0.02, 0.04, 0.02}, tmp.path, 2, &warnings);
  REQUIRE(rows.size() == 2u);
  CHECK(rows[0].epsilon == 0.04);
  CHECK(rows[1].epsilon == 0.02);
  CHECK(rows[0].ok);
  CHECK(rows[1].ok);
  REQUIRE(warnings.size() == 1u);
  CHECK(warnings[0].find("duplicate") != std::string::npos);
  for (const auto& r : rows) CHECK(fs::exists(tmp.path / r.dir / "series.csv"));
  CHECK_THROWS_AS(run_sweep(s, {0.02}, tmp.path, 1), ConfigError);

  const fs::path file = write_scenario(tmp.path, small_scenario());
  std::ostringstream out, err;
  CHECK(command_sweep(file, {0.02}, tmp.path, out, err) == kExitConfig);
  CHECK(command_sweep(file, {0.02, 0.04}, tmp.path, out, err) == kExitOk);
  const std::string table = slurp(artifact_dir(s, tmp.path, "_sweep") / "sweep.csv");
  CHECK(table.rfind("epsilon,status,residual_post_layer,sup_distance,monotonicity_violation", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}

TEST_CASE("sweep reports failed sub-runs") {
  TempDir tmp("sweepfail");
  auto j = small_scenario();
  j["model"]["params"] = {{"k0", 400.0}};
  const Scenario s = Scenario::from_json(j);
  // the small epsilon overflows the reaction exponent, the large one does not
  const auto rows = run_sweep(s, {1.0, 0.001}, tmp.path, 2);
  REQUIRE(rows.size() == 2u);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[1].ok);
  CHECK_FALSE(rows[1].error.empty());
  std::ostringstream os;
  write_sweep_csv(os, rows);
  CHECK(os.str().find("failed") != std::string::npos);
}

TEST_CASE("worker limit honours the environment") {
  setenv("CONCENTRA_THREADS", "3", 1);
  CHECK(worker_limit() == 3u);
  setenv("CONCENTRA_THREADS", "zero", 1);
  CHECK(worker_limit() >= 1u);
  unsetenv("CONCENTRA_THREADS");
}

TEST_CASE("canonical command closures") {
  TempDir tmp("canon");
  const fs::path file = scenarios_dir() / "scenario1_anisotropic.json";
  std::ostringstream out, err;
  CHECK(command_canonical(file, "from_pde", std::nullopt, tmp.path, out, err) == kExitConfig);
  CHECK(command_canonical(file, "sideways", std::nullopt, tmp.path, out, err) == kExitConfig);
  REQUIRE(command_canonical(file, "frozen", std::nullopt, tmp.path, out, err) == kExitOk);
  const Scenario s = load_scenario(file);
  const fs::path dir = artifact_dir(s, tmp.path, "_canonical_frozen");
  const json reports = read_json(dir / "reports.json");
  const auto v = reports["canonical"][0]["initial_velocity"];
  CHECK(v[0].get<double>() == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(v[1].get<double>() == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("canonical from_pde reuses a run directory") {
  TempDir tmp("frompde");
  const fs::path file = write_scenario(tmp.path, small_scenario());
  std::ostringstream out, err;
  REQUIRE(command_run(file, tmp.path, out, err) == kExitOk);
  const fs::path run_dir = artifact_dir(load_scenario(file), tmp.path);
  CHECK(command_canonical(file, "from_pde", run_dir, tmp.path, out, err) == kExitOk);
  CHECK(command_canonical(file, "from_pde", tmp.path / "nowhere", tmp.path, out, err) == kExitConfig);
}

TEST_CASE("canonical concave scenario converges to its attractor") {
  const Scenario s = load_scenario(scenarios_dir() / "quadratic_concave.json");
  auto j = s.to_json();
  j["canonical"]["T"] = 20.0;
  j["canonical"]["dt"] = 0.01;
  const auto a = analyze_canonical(Scenario::from_json(j), ClosureMode::Riccati);
  REQUIRE(a.attractor.has_value());
  REQUIRE(a.attractor->found);
  REQUIRE(a.runs.size() == 1u);
  REQUIRE(a.runs[0].result.has_value());
  const auto& last = a.runs[0].result->trajectory.samples.back();
  CHECK((last.x_bar - a.attractor->point).norm() <= 1e-6);
  CHECK(std::abs(last.macro - a.attractor->macro) <= 1e-6);
}

TEST_CASE("canonical local scenario passes persistence and lyapunov") {
  const Scenario s = load_scenario(scenarios_dir() / "local_logistic.json");
  const auto a = analyze_canonical(s, ClosureMode::Riccati);
  int seen = 0;
  for (const auto& c : a.checks) {
    if (c.check_name.find("persistence") != std::string::npos || c.check_name.find("lyapunov") != std::string::npos) {
      ++seen;
      CHECK_MESSAGE(c.verdict, c.check_name);
    }
  }
  CHECK(seen >= 2);
}

TEST_CASE("bundled scenario 1 emits the three snapshots") {
  TempDir tmp("s1");
  const fs::path file = scenarios_dir() / "scenario1_anisotropic.json";
  std::ostringstream out, err;
  REQUIRE(command_run(file, tmp.path, out, err) == kExitOk);
  const fs::path dir = artifact_dir(load_scenario(file), tmp.path);
  int snaps = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("snap_", 0) == 0) ++snaps;
  CHECK(snaps == 3);
  for (const char* f : {"snap_000000.csv", "snap_000040.csv", "snap_000080.csv"}) CHECK(fs::exists(dir / f));
}

TEST_CASE("bundled scenario 3 marks one bump dominated") {
  TempDir tmp("s3");
  const fs::path file = scenarios_dir() / "scenario3_ellipse.json";
  std::ostringstream out, err;
  REQUIRE(command_run(file, tmp.path, out, err) == kExitOk);
  const json reports = read_json(artifact_dir(load_scenario(file), tmp.path) / "reports.json");
  REQUIRE(reports["bumps"].size() == 2u);
  int dominated = 0;
  for (const auto& b : reports["bumps"]) dominated += b["dominated"].get<bool>() ? 1 : 0;
  CHECK(dominated == 1);
}
