#pragma once

#include "concentra/types.hpp"

#include <string>
#include <vector>

namespace concentra {

/// Per-step macroscopic observables of a PDE run.
struct MacroSeries {
  std::vector<double> times;
  std::vector<double> I;
  std::vector<double> rho;
  std::vector<double> J;
  std::vector<double> boundary_mass;

  std::size_t size() const { return times.size(); }
  void push(double t, double i, double r, double j, double b);
  /// Throws ValidationError unless lengths agree, times increase and rho >= 0.
  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  TraitPoint x_bar;
  /// Ī for the global model, ρ̄ for the local one.
  double macro = 0.0;
  TraitMatrix hessian;
};

/// Concentration point samples. `source` is one of pde, canonical_from_pde,
/// canonical_riccati, canonical_frozen.
struct ConcentrationTrajectory {
  std::string source = "pde";
  std::vector<TrajectorySample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  /// Appends, enforcing strictly increasing time and macro >= 0.
  void push(TrajectorySample s);
  std::vector<double> times() const;
  std::vector<double> macros() const;
};

}  // namespace concentra
