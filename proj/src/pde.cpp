#include "concentra/pde.hpp"

#include "concentra/error.hpp"
#include "concentra/hash.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <set>

namespace concentra {

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Global:
      return "global";
    case ModelVariant::Local:
      return "local";
    case ModelVariant::VariableDiffusion:
      return "variable_diffusion";
  }
  return "unknown";
}

std::string to_string(LinearSolver s) { return s == LinearSolver::Cholesky ? "cholesky" : "cg"; }

ModelVariant parse_variant(const std::string& s) {
  if (s == "global") return ModelVariant::Global;
  if (s == "local") return ModelVariant::Local;
  if (s == "variable_diffusion") return ModelVariant::VariableDiffusion;
  throw ValidationError("config.model_variant", "unknown variant '" + s + "'");
}

LinearSolver parse_solver(const std::string& s) {
  if (s == "cholesky") return LinearSolver::Cholesky;
  if (s == "cg") return LinearSolver::Cg;
  throw ValidationError("config.solver", "unknown solver '" + s + "' (cholesky|cg)");
}

void SimulationConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ValidationError("config.epsilon", "must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("config.dt", "must be positive");
  if (steps < 0) throw ValidationError("config.steps", "must be nonnegative");
  if (snapshot_every < 0) throw ValidationError("config.snapshot_every", "must be nonnegative");
  if (!(mass_target > 0.0)) throw ValidationError("config.mass_target", "must be positive");
  if (!(cg_tolerance > 0.0)) throw ValidationError("config.cg_tolerance", "must be positive");
  if (cg_max_iterations < 1) throw ValidationError("config.cg_max_iterations", "must be positive");
  if (picard_iterations < 0) throw ValidationError("config.picard_iterations", "must be nonnegative");
}

nlohmann::json SimulationConfig::to_json() const {
  return {{"epsilon", epsilon},
          {"dt", dt},
          {"steps", steps},
          {"model_variant", to_string(variant)},
          {"snapshot_every", snapshot_every},
          {"mass_target", mass_target},
          {"solver", to_string(solver)},
          {"cg_tolerance", cg_tolerance},
          {"cg_max_iterations", cg_max_iterations},
          {"picard_iterations", picard_iterations},
          {"diffusion", diffusion},
          {"boundary", to_string(boundary)}};
}

double QuadraticBump::phase(const TraitPoint& x) const {
  const TraitPoint z = x - center;
  return -z.dot(form * z);
}

DensityField unnormalized_density(const TraitGrid& grid, const std::vector<QuadraticBump>& u0,
                                  double epsilon) {
  if (u0.empty()) throw ValidationError("u0", "at least one bump is required");
  std::vector<double> n(grid.size(), 0.0);
  for (std::size_t k = 0; k < n.size(); ++k) {
    const TraitPoint x = grid.node(k);
    double s = 0.0;
    for (const auto& b : u0) s += b.weight * std::exp(b.phase(x) / epsilon);
    n[k] = s;
  }
  return DensityField(grid, std::move(n));
}

double mass_constant(const TraitGrid& grid, const std::vector<QuadraticBump>& u0, double epsilon,
                     double mass_target) {
  if (!(mass_target > 0.0)) throw ConfigError("mass_target must be positive");
  const double m = integrate(unnormalized_density(grid, u0, epsilon));
  if (!(m > 0.0))
    throw DegenerateInitializationError("initial density underflows to zero on the whole grid");
  return mass_target / m;
}

DensityField init_density(const TraitGrid& grid, const std::vector<QuadraticBump>& u0,
                          double epsilon, double mass_target) {
  if (!(mass_target > 0.0)) throw ConfigError("mass_target must be positive");
  DensityField n = unnormalized_density(grid, u0, epsilon);
  const double m = integrate(n);
  if (!(m > 0.0))
    throw DegenerateInitializationError("initial density underflows to zero on the whole grid");
  for (double& v : n.values) v = v / m * mass_target;
  return n;
}

// ---------------------------------------------------------------------------

struct ImexIntegrator::Factor {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

ImexIntegrator::~ImexIntegrator() = default;
ImexIntegrator::ImexIntegrator(ImexIntegrator&&) noexcept = default;
ImexIntegrator& ImexIntegrator::operator=(ImexIntegrator&&) noexcept = default;

ImexIntegrator::ImexIntegrator(const TraitGrid& grid, GrowthModel model,
                               DiffusionCoefficient diffusion, SimulationConfig config)
    : grid_(grid), model_(std::move(model)), diffusion_(std::move(diffusion)),
      config_(std::move(config)) {
  config_.validate();
  const bool local = std::holds_alternative<LocalCompetitionModel>(model_);
  if (local != (config_.variant == ModelVariant::Local))
    throw ValidationError("config.model_variant",
                          "variant " + to_string(config_.variant) + " does not match the model kind");
  const std::size_t n = grid_.size();
  nodes_.resize(n);
  for (std::size_t k = 0; k < n; ++k) nodes_[k] = grid_.node(k);
  weights_.assign(n, 1.0);
  if (const auto* g = std::get_if<GlobalInteractionModel>(&model_)) {
    if (g->weight)
      for (std::size_t k = 0; k < n; ++k) weights_[k] = g->weight(nodes_[k]);
  } else {
    const auto& m = std::get<LocalCompetitionModel>(model_);
    intrinsic_.resize(n);
    for (std::size_t k = 0; k < n; ++k) intrinsic_[k] = m.intrinsic_rate(nodes_[k]);
    if (!m.separable && n <= 1024) {
      kernel_matrix_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) kernel_matrix_[i * n + j] = m.kernel(nodes_[i], nodes_[j]);
    }
  }

  if (config_.variant == ModelVariant::VariableDiffusion)
    stencil_ = std::make_unique<DiffusionStencil>(grid_, diffusion_);
  else
    stencil_ = std::make_unique<DiffusionStencil>(grid_);

  if (config_.diffusion && config_.solver == LinearSolver::Cholesky) {
    const double c = config_.epsilon * config_.dt;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> diag(n, 1.0);
    const int d = grid_.dimension();
    const int n1 = grid_.points(0);
    const int n2 = d == 2 ? grid_.points(1) : 1;
    auto couple = [&](std::size_t a, std::size_t b, double w) {
      diag[a] += c * w;
      diag[b] += c * w;
      trip.emplace_back(static_cast<int>(a), static_cast<int>(b), -c * w);
      trip.emplace_back(static_cast<int>(b), static_cast<int>(a), -c * w);
    };
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        if (i + 1 < n1)
          couple(grid_.index(i, j), grid_.index(i + 1, j), stencil_->face(0, stencil_->face_index(0, i, j)));
        if (d == 2 && j + 1 < n2)
          couple(grid_.index(i, j), grid_.index(i, j + 1), stencil_->face(1, stencil_->face_index(1, i, j)));
      }
    for (std::size_t k = 0; k < n; ++k) trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag[k]);
    Eigen::SparseMatrix<double> A(static_cast<int>(n), static_cast<int>(n));
    A.setFromTriplets(trip.begin(), trip.end());
    factor_ = std::make_unique<Factor>();
    factor_->llt.compute(A);
    if (factor_->llt.info() != Eigen::Success)
      throw SolverError("Cholesky factorization of the implicit diffusion operator failed", 0.0);
  }
}

double ImexIntegrator::macro(const DensityField& density) const {
  double s = 0.0;
  for (std::size_t k = 0; k < density.values.size(); ++k) s += weights_[k] * density.values[k];
  return s * grid_.cell_volume();
}

ScalarField ImexIntegrator::competition(const DensityField& density) const {
  const auto& m = std::get<LocalCompetitionModel>(model_);
  if (kernel_matrix_.empty()) return convolve_kernel(density, m);
  const std::size_t n = nodes_.size();
  std::vector<double> out(n);
  const double vol = grid_.cell_volume();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kernel_matrix_[i * n + j] * density.values[j];
    out[i] = s * vol;
  }
  return ScalarField(grid_, std::move(out));
}

SimulationState ImexIntegrator::initial_state(DensityField density) const {
  if (!(density.grid == grid_)) throw GridError("initial density lives on a different grid");
  SimulationState s;
  s.density = std::move(density);
  s.I = macro(s.density);
  if (config_.variant == ModelVariant::Local) s.competition = competition(s.density);
  return s;
}

std::vector<double> ImexIntegrator::node_rates(const SimulationState& state) const {
  const std::size_t n = nodes_.size();
  std::vector<double> r(n);
  if (const auto* g = std::get_if<GlobalInteractionModel>(&model_)) {
    for (std::size_t k = 0; k < n; ++k) r[k] = eval_growth(*g, nodes_[k], state.I);
  } else {
    const ScalarField comp = state.competition ? *state.competition : competition(state.density);
    for (std::size_t k = 0; k < n; ++k) r[k] = intrinsic_[k] - comp.values[k];
  }
  return r;
}

double ImexIntegrator::flux_observable(const SimulationState& state) const {
  const auto r = node_rates(state);
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) s += weights_[k] * r[k] * state.density.values[k];
  return s * grid_.cell_volume() / config_.epsilon;
}

double ImexIntegrator::reaction_advisory(const SimulationState& state) const {
  double m = 0.0;
  for (double v : node_rates(state)) m = std::max(m, std::abs(v));
  return m * config_.dt / config_.epsilon;
}

std::vector<double> ImexIntegrator::reaction(const std::vector<double>& n,
                                             const std::vector<double>& rates) const {
  std::vector<double> out(n.size());
  const double s = config_.dt / config_.epsilon;
  for (std::size_t k = 0; k < n.size(); ++k) {
    const double e = s * rates[k];
    if (e > 700.0)
      throw RangeError("reaction exponent " + std::to_string(e) + " overflows at " +
                           format_point(nodes_[k]),
                       k);
    out[k] = n[k] * std::exp(e);
  }
  return out;
}

std::vector<double> ImexIntegrator::diffuse(const std::vector<double>& rhs,
                                            const std::vector<double>& guess) {
  if (!config_.diffusion) return rhs;
  const std::size_t n = rhs.size();
  if (factor_) {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd x = factor_->llt.solve(b);
    return std::vector<double>(x.data(), x.data() + n);
  }
  // Matrix-free conjugate gradients on (Id - ε dt L).
  const double c = config_.epsilon * config_.dt;
  std::vector<double> x = guess, r(n), p(n), Ap(n), Lx(n);
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    stencil_->apply(v, Lx);
    for (std::size_t k = 0; k < n; ++k) out[k] = v[k] - c * Lx[k];
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
  };
  const double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0.0) return std::vector<double>(n, 0.0);
  apply(x, Ap);
  for (std::size_t k = 0; k < n; ++k) r[k] = rhs[k] - Ap[k];
  p = r;
  double rr = dot(r, r);
  int it = 0;
  while (std::sqrt(rr) > config_.cg_tolerance * bnorm) {
    if (++it > config_.cg_max_iterations)
      throw SolverError("conjugate gradients did not converge in " +
                            std::to_string(config_.cg_max_iterations) + " iterations",
                        std::sqrt(rr) / bnorm);
    apply(p, Ap);
    const double alpha = rr / dot(p, Ap);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
  }
  cg_iterations_ = it;
  for (double& v : x)
    if (v < 0.0) {
      v = 0.0;
      ++clamped_nodes_;
    }
  return x;
}

SimulationState ImexIntegrator::step(const SimulationState& state) {
  const auto& n = state.density.values;
  std::vector<double> rates = node_rates(state);
  std::vector<double> next = diffuse(reaction(n, rates), n);
  for (int p = 0; p < config_.picard_iterations; ++p) {
    for (double& v : next)
      if (v < kTinyDensity) v = 0.0;
    SimulationState trial = initial_state(DensityField(grid_, next));
    SimulationState mid = state;
    mid.I = 0.5 * (state.I + trial.I);
    if (mid.competition) {
      for (std::size_t k = 0; k < n.size(); ++k)
        mid.competition->values[k] = 0.5 * (state.competition->values[k] + trial.competition->values[k]);
    }
    rates = node_rates(mid);
    next = diffuse(reaction(n, rates), next);
  }
  for (double& v : next)
    if (v < kTinyDensity) v = 0.0;
  SimulationState out = initial_state(DensityField(grid_, std::move(next)));
  out.step = state.step + 1;
  out.time = state.time + config_.dt;
  return out;
}

namespace {

SimulationState one_step(const SimulationState& state, GrowthModel model, DiffusionCoefficient b,
                         const SimulationConfig& config) {
  ImexIntegrator integ(state.density.grid, std::move(model), std::move(b), config);
  SimulationState s = state;
  s.I = integ.macro(s.density);
  if (config.variant == ModelVariant::Local && !s.competition)
    s.competition = integ.initial_state(s.density).competition;
  return integ.step(s);
}

}  // namespace

SimulationState imex_step_global(const SimulationState& state, const GlobalInteractionModel& model,
                                 const SimulationConfig& config) {
  SimulationConfig c = config;
  c.variant = ModelVariant::Global;
  return one_step(state, model, unit_diffusion(state.density.grid.dimension()), c);
}

SimulationState imex_step_local(const SimulationState& state, const LocalCompetitionModel& model,
                                const SimulationConfig& config) {
  SimulationConfig c = config;
  c.variant = ModelVariant::Local;
  return one_step(state, model, unit_diffusion(state.density.grid.dimension()), c);
}

SimulationState imex_step_vardiff(const SimulationState& state, const GlobalInteractionModel& model,
                                  const DiffusionCoefficient& b, const SimulationConfig& config) {
  SimulationConfig c = config;
  c.variant = ModelVariant::VariableDiffusion;
  return one_step(state, model, b, c);
}

// ---------------------------------------------------------------------------

namespace {

double residual_at(const ImexIntegrator& integ, const SimulationState& s, const TraitPoint& x) {
  if (const auto* g = std::get_if<GlobalInteractionModel>(&integ.model()))
    return std::abs(g->rate(x, s.I));
  const auto& m = std::get<LocalCompetitionModel>(integ.model());
  const auto& grid = s.density.grid;
  double c = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (s.density.values[k] != 0.0) c += m.kernel(x, grid.node(k)) * s.density.values[k];
  c *= grid.cell_volume();
  return std::abs(m.intrinsic_rate(x) - c);
}

}  // namespace

SimulationResult run_simulation(const SimulationConfig& config, const GrowthModel& model,
                                const DiffusionCoefficient& diffusion, const TraitGrid& grid,
                                const std::vector<QuadraticBump>& u0, const ProbeOptions& probes) {
  ImexIntegrator integ(grid, model, diffusion, config);
  SimulationResult res;
  const double mass_c = mass_constant(grid, u0, config.epsilon, config.mass_target);
  SimulationState state = integ.initial_state(init_density(grid, u0, config.epsilon, config.mass_target));
  const std::set<int> probe_steps(probes.steps.begin(), probes.steps.end());
  bool boundary_warned = false;
  bool hessian_warned = false;

  auto record = [&](const SimulationState& s) {
    const double rho = integrate(s.density);
    const double bm = boundary_mass(s.density, 2);
    res.series.push(s.time, s.I, rho, integ.flux_observable(s), bm);
    if (!boundary_warned && bm > 1e-8 * rho) {
      boundary_warned = true;
      res.warnings.push_back("boundary mass " + std::to_string(bm) + " exceeds 1e-8 rho at step " +
                             std::to_string(s.step));
    }
    const WkbField u = to_wkb(s.density, config.epsilon);
    const LocalMax top = locate_max(u, false).front();
    TrajectorySample sample;
    sample.t = s.time;
    sample.x_bar = top.point;
    sample.macro = s.I;
    try {
      sample.hessian = hessian_at(u, top.point);
    } catch (const BoundaryError&) {
      const int d = grid.dimension();
      sample.hessian = TraitMatrix::Constant(d, d, std::nan(""));
      if (!hessian_warned) {
        hessian_warned = true;
        res.warnings.push_back("concentration point within two cells of the boundary at step " +
                               std::to_string(s.step) + "; Hessian unavailable");
      }
    }
    res.trajectory.push(sample);
    res.residual_R.push_back(residual_at(integ, s, top.point));
    if (config.snapshot_every > 0 && s.step % config.snapshot_every == 0)
      res.snapshots.push_back({s.step, s.time, s.density});
    if (probe_steps.count(s.step)) {
      ProbeRecord p;
      p.step = s.step;
      p.time = s.time;
      p.maxima = locate_max(u, probes.multi_max);
      if (probes.constants) p.regularity = regularity_monitor(u, *probes.constants, s.time);
      res.probes.push_back(std::move(p));
    }
  };

  res.reaction_advisory = integ.reaction_advisory(state);
  if (res.reaction_advisory > 1.0)
    res.warnings.push_back("reaction advisory dt*sup|R|/eps = " + std::to_string(res.reaction_advisory) +
                           " exceeds 1");
  record(state);
  for (int k = 0; k < config.steps; ++k) {
    state = integ.step(state);
    record(state);
  }
  if (integ.clamped_nodes() > 0)
    res.warnings.push_back("conjugate gradients produced " + std::to_string(integ.clamped_nodes()) +
                           " negative entries that were set to zero");
  res.final_state = state;

  nlohmann::json g = {{"dimension", grid.dimension()},
                      {"points_per_axis", grid.points()},
                      {"lower", std::vector<double>(grid.lower().data(), grid.lower().data() + grid.dimension())},
                      {"upper", std::vector<double>(grid.upper().data(), grid.upper().data() + grid.dimension())}};
  nlohmann::json cfg = config.to_json();
  res.manifest = {{"config", cfg},
                  {"grid", g},
                  {"boundary", to_string(config.boundary)},
                  {"config_hash", git_blob_hash(cfg.dump() + g.dump())},
                  {"mass_constant", mass_c},
                  {"density_floor", kDensityFloor},
                  {"tiny_density_cutoff", kTinyDensity},
                  {"reaction_advisory", res.reaction_advisory},
                  {"probe_steps", probes.steps},
                  {"warnings", res.warnings}};
  return res;
}

}  // namespace concentra
