#pragma once

#include "concentra/grid.hpp"
#include "concentra/model.hpp"
#include "concentra/series.hpp"
#include "concentra/wkb.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace concentra {

enum class ModelVariant { Global, Local, VariableDiffusion };
enum class LinearSolver { Cholesky, Cg };

std::string to_string(ModelVariant v);
std::string to_string(LinearSolver s);
ModelVariant parse_variant(const std::string& s);
LinearSolver parse_solver(const std::string& s);

struct SimulationConfig {
  double epsilon = 0.005;
  double dt = 0.01;
  int steps = 80;
  ModelVariant variant = ModelVariant::Global;
  /// Snapshot every k steps including step 0; 0 disables snapshots.
  int snapshot_every = 0;
  double mass_target = 0.3;
  LinearSolver solver = LinearSolver::Cholesky;
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 20000;
  /// Extra passes re-evaluating I with the trapezoidal average; 0 keeps I frozen.
  int picard_iterations = 0;
  /// When false the ε-diffusion is switched off and only the reaction acts.
  bool diffusion = true;
  BoundaryRule boundary = BoundaryRule::NoFlux;

  /// Throws ValidationError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// One term of the initial WKB phase: q(x) = -(x - center)ᵀ form (x - center).
struct QuadraticBump {
  TraitPoint center;
  TraitMatrix form;
  double weight = 1.0;

  double phase(const TraitPoint& x) const;
};

/// Densities below this are set to zero after each step to stay clear of subnormals.
inline constexpr double kTinyDensity = 1e-300;

struct SimulationState {
  int step = 0;
  double time = 0.0;
  DensityField density;
  /// I = ∫ψn for the global variants, ρ = ∫n for the local one.
  double I = 0.0;
  /// C * n on the grid (local variant only).
  std::optional<ScalarField> competition;
};

/// Σ_k w_k exp(q_k / ε) on the grid, not yet normalized.
DensityField unnormalized_density(const TraitGrid& grid, const std::vector<QuadraticBump>& u0,
                                  double epsilon);
/// C_mass with C_mass ∫Σ w_k exp(q_k / ε) = mass_target.
double mass_constant(const TraitGrid& grid, const std::vector<QuadraticBump>& u0, double epsilon,
                     double mass_target);
DensityField init_density(const TraitGrid& grid, const std::vector<QuadraticBump>& u0,
                          double epsilon, double mass_target);

/// Stepper for one run. The implicit operator is assembled and factored once.
class ImexIntegrator {
 public:
  ImexIntegrator(const TraitGrid& grid, GrowthModel model, DiffusionCoefficient diffusion,
                 SimulationConfig config);
  ~ImexIntegrator();
  ImexIntegrator(ImexIntegrator&&) noexcept;
  ImexIntegrator& operator=(ImexIntegrator&&) noexcept;

  SimulationState initial_state(DensityField density) const;
  SimulationState step(const SimulationState& state);

  /// I = ∫ψn (global variants) or ρ = ∫n (local).
  double macro(const DensityField& density) const;
  /// Growth rate at every node for the given state.
  std::vector<double> node_rates(const SimulationState& state) const;
  /// J = (1/ε) ∫ψ R n.
  double flux_observable(const SimulationState& state) const;
  /// sup |R| dt / ε over the grid at the given state.
  double reaction_advisory(const SimulationState& state) const;

  const SimulationConfig& config() const { return config_; }
  const TraitGrid& grid() const { return grid_; }
  const GrowthModel& model() const { return model_; }
  int cg_iterations() const { return cg_iterations_; }
  std::size_t clamped_nodes() const { return clamped_nodes_; }

 private:
  std::vector<double> reaction(const std::vector<double>& n, const std::vector<double>& rates) const;
  std::vector<double> diffuse(const std::vector<double>& rhs, const std::vector<double>& guess);
  ScalarField competition(const DensityField& density) const;

  TraitGrid grid_;
  GrowthModel model_;
  DiffusionCoefficient diffusion_;
  SimulationConfig config_;
  std::vector<TraitPoint> nodes_;
  std::vector<double> weights_;
  std::vector<double> intrinsic_;
  std::vector<double> kernel_matrix_;
  std::unique_ptr<DiffusionStencil> stencil_;
  struct Factor;
  std::unique_ptr<Factor> factor_;
  int cg_iterations_ = 0;
  std::size_t clamped_nodes_ = 0;
};

SimulationState imex_step_global(const SimulationState& state, const GlobalInteractionModel& model,
                                 const SimulationConfig& config);
SimulationState imex_step_local(const SimulationState& state, const LocalCompetitionModel& model,
                                const SimulationConfig& config);
SimulationState imex_step_vardiff(const SimulationState& state, const GlobalInteractionModel& model,
                                  const DiffusionCoefficient& b, const SimulationConfig& config);

struct ProbeOptions {
  std::vector<int> steps;
  bool multi_max = false;
  /// Enables the regularity monitor at probe steps.
  std::optional<AssumptionConstants> constants;
};

struct ProbeRecord {
  int step = 0;
  double time = 0.0;
  std::vector<LocalMax> maxima;
  std::optional<RegularityReport> regularity;
};

struct Snapshot {
  int step = 0;
  double time = 0.0;
  DensityField density;
};

struct SimulationResult {
  MacroSeries series;
  ConcentrationTrajectory trajectory;
  /// |R(x̄_ε, I_ε)| (global) or |r(x̄_ε) - (C*n)(x̄_ε)| (local) per step.
  std::vector<double> residual_R;
  std::vector<Snapshot> snapshots;
  std::vector<ProbeRecord> probes;
  SimulationState final_state;
  std::vector<std::string> warnings;
  double reaction_advisory = 0.0;
  nlohmann::json manifest;
};

SimulationResult run_simulation(const SimulationConfig& config, const GrowthModel& model,
                                const DiffusionCoefficient& diffusion, const TraitGrid& grid,
                                const std::vector<QuadraticBump>& u0, const ProbeOptions& probes);

}  // namespace concentra
