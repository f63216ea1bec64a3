#include "concentra/series.hpp"

#include "concentra/error.hpp"

namespace concentra {

void MacroSeries::push(double t, double i, double r, double j, double b) {
  times.push_back(t);
  I.push_back(i);
  rho.push_back(r);
  J.push_back(j);
  boundary_mass.push_back(b);
}

void MacroSeries::validate() const {
  const std::size_t n = times.size();
  if (I.size() != n || rho.size() != n || J.size() != n || boundary_mass.size() != n)
    throw ValidationError("series", "columns have unequal lengths");
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && !(times[k] > times[k - 1]))
      throw ValidationError("series.t", "times must increase at row " + std::to_string(k));
    if (rho[k] < 0.0) throw ValidationError("series.rho", "negative mass at row " + std::to_string(k));
  }
}

void ConcentrationTrajectory::push(TrajectorySample s) {
  if (!samples.empty() && !(s.t > samples.back().t))
    throw ValidationError("trajectory.t", "sample times must increase strictly");
  if (s.macro < 0.0) throw ValidationError("trajectory.macro", "macro value must be nonnegative");
  samples.push_back(std::move(s));
}

std::vector<double> ConcentrationTrajectory::times() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.t);
  return out;
}

std::vector<double> ConcentrationTrajectory::macros() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.macro);
  return out;
}

}  // namespace concentra
