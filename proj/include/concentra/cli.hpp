#pragma once

#include "concentra/canonical.hpp"
#include "concentra/diagnostics.hpp"
#include "concentra/pde.hpp"
#include "concentra/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace concentra {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// <name>_<first 12 hex digits of the scenario hash>, with an optional suffix.
std::filesystem::path artifact_dir(const Scenario& scenario, const std::filesystem::path& root,
                                   const std::string& suffix = "");

struct CanonicalRun {
  TraitPoint x0;
  ClosureMode closure = ClosureMode::Riccati;
  std::optional<CanonicalResult> result;
  /// Set when the integration raised; result is then empty.
  std::string error;
};

/// Everything computed by one `run`, kept in memory for the writers and the tests.
struct RunAnalysis {
  Scenario scenario;
  AssumptionConstants constants;
  std::optional<AssumptionReport> assumptions;
  SimulationResult pde;
  std::vector<CanonicalRun> canonical;
  std::vector<CheckReport> checks;
  std::vector<BumpVerdict> bumps;
  std::optional<Attractor> attractor;
  std::vector<std::string> warnings;

  double residual_post_layer = 0.0;
  double residual_all = 0.0;
  /// PDE vs the first canonical trajectory; NaN when there is none.
  double sup_distance = 0.0;
  /// Smallest post-layer increment of the PDE macro series.
  double monotonicity = 0.0;
  /// (max_t I - I_M) / ε².
  double excess_constant = 0.0;

  const CheckReport* find_check(const std::string& name) const;
};

RunAnalysis analyze_run(const Scenario& scenario);

/// manifest.json, series.csv, trajectory.csv, snap_<step>.csv, reports.json.
void write_run_artifacts(const RunAnalysis& analysis, const std::filesystem::path& dir);

void write_series_csv(std::ostream& os, const SimulationResult& result);
void write_trajectory_csv(std::ostream& os, const std::vector<const ConcentrationTrajectory*>& trajs);
/// Rows with source == `source` from a trajectory.csv (as written above).
ConcentrationTrajectory read_trajectory_csv(std::istream& is, const std::string& source);

struct CanonicalAnalysis {
  Scenario scenario;
  std::vector<CanonicalRun> runs;
  std::optional<Attractor> attractor;
  std::vector<CheckReport> checks;
};

/// Limit dynamics only. from_pde needs the trajectory of an earlier run.
CanonicalAnalysis analyze_canonical(const Scenario& scenario, ClosureMode closure,
                                    const std::optional<ConcentrationTrajectory>& pde = std::nullopt);
void write_canonical_artifacts(const CanonicalAnalysis& analysis, const std::filesystem::path& dir);

struct SweepRow {
  double epsilon = 0.0;
  bool ok = false;
  std::string error;
  double residual_post_layer = 0.0;
  double sup_distance = 0.0;
  double monotonicity = 0.0;
  double excess_constant = 0.0;
  std::string dir;
};

/// Runs one scenario per ε on at most `threads` workers; rows sorted by ε descending.
/// Each successful sub-run also writes its own artifact directory under `root`.
std::vector<SweepRow> run_sweep(const Scenario& scenario, std::vector<double> epsilons,
                                const std::filesystem::path& root, unsigned threads,
                                std::vector<std::string>* warnings = nullptr);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Worker cap from CONCENTRA_THREADS, else the hardware concurrency.
unsigned worker_limit();

// Command entry points. Messages go to `err`; return values are exit codes.
int command_run(const std::filesystem::path& file, const std::filesystem::path& root,
                std::ostream& out, std::ostream& err);
int command_sweep(const std::filesystem::path& file, const std::vector<double>& epsilons,
                  const std::filesystem::path& root, std::ostream& out, std::ostream& err);
int command_canonical(const std::filesystem::path& file, const std::string& closure,
                      const std::optional<std::filesystem::path>& pde_dir,
                      const std::filesystem::path& root, std::ostream& out, std::ostream& err);
int command_check(const std::filesystem::path& file, std::ostream& out, std::ostream& err);

}  // namespace concentra
