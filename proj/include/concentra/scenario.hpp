#pragma once

#include "concentra/canonical.hpp"
#include "concentra/grid.hpp"
#include "concentra/model.hpp"
#include "concentra/pde.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace concentra {

struct ModelSpec {
  /// "global" or "local".
  std::string kind = "global";
  std::string family;
  nlohmann::json params = nlohmann::json::object();
};

struct DiffusionSpec {
  std::string family = "constant";
  nlohmann::json params = nlohmann::json::object();
};

struct GridSpec {
  int dimension = 2;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> points;
};

struct ProbeSpec {
  std::vector<int> steps;
  bool multi_max = false;
};

struct CanonicalSpec {
  ClosureMode closure = ClosureMode::FromPde;
  double dt = 0.0;
  double T = 0.0;
};

struct DiagnosticsSpec {
  double t_layer = 0.0;
  bool assumptions = true;
  bool regularity = true;
  bool canonical = true;
  int samples = 64;
};

/// A fully resolved run description. to_json emits every default, and
/// from_json(to_json(s)) reproduces s exactly.
struct Scenario {
  std::string name;
  std::string description;
  ModelSpec model;
  DiffusionSpec diffusion;
  GridSpec grid;
  SimulationConfig config;
  std::vector<QuadraticBump> u0;
  ProbeSpec probes;
  /// User overrides of the derived assumption constants.
  nlohmann::json constants = nlohmann::json::object();
  CanonicalSpec canonical;
  DiagnosticsSpec diagnostics;

  static Scenario from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Box box() const;
  TraitGrid build_grid() const;
  GrowthModel build_model() const;
  DiffusionCoefficient build_diffusion() const;
  /// Content hash of the resolved encoding.
  std::string hash() const;
};

Scenario load_scenario(const std::filesystem::path& file);

/// u0 = ε ln(C_mass Σ w_k exp(q_k / ε)) and its Hessian, for the assumption checks.
InitialProfile initial_profile(const std::vector<QuadraticBump>& u0, double epsilon,
                               double mass_constant, double initial_I);

/// Constants measured on the box for this scenario, then overridden by the
/// scenario's `constants` object.
AssumptionConstants derive_constants(const Scenario& scenario, const GrowthModel& model,
                                     double mass_constant, double initial_I);

nlohmann::json to_json(const AssumptionConstants& c);
AssumptionConstants constants_from_json(const nlohmann::json& j, int dimension);
nlohmann::json to_json(const AssumptionReport& report);

}  // namespace concentra
