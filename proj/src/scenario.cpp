#include "concentra/scenario.hpp"

#include "concentra/error.hpp"
#include "concentra/families.hpp"
#include "concentra/hash.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace concentra {

using json = nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "scenario" : path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw ValidationError(path.empty() ? k : path + "." + k, "unknown field");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_number(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(join(path, key), "expected a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ValidationError(join(path, key), "expected an integer");
  return v.get<int>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ValidationError(join(path, key), "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ValidationError(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_vector(const json& v, const std::string& path, int dimension) {
  if (v.is_number()) return std::vector<double>(dimension, v.get<double>());
  if (!v.is_array() || static_cast<int>(v.size()) != dimension)
    throw ValidationError(path, "expected " + std::to_string(dimension) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ValidationError(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

TraitPoint to_point(const std::vector<double>& v) {
  TraitPoint p(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<int>(i)] = v[i];
  return p;
}

json point_json(const TraitPoint& p) {
  json a = json::array();
  for (int i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

json matrix_json(const TraitMatrix& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

/// Accepts a scalar (multiple of the identity), a diagonal vector or a full matrix.
TraitMatrix parse_form(const json& v, const std::string& path, int d) {
  TraitMatrix m = TraitMatrix::Zero(d, d);
  if (v.is_number()) {
    m = TraitMatrix::Identity(d, d) * v.get<double>();
  } else if (v.is_array() && static_cast<int>(v.size()) == d && !v.empty() && v[0].is_number()) {
    const auto diag = get_vector(v, path, d);
    for (int i = 0; i < d; ++i) m(i, i) = diag[i];
  } else if (v.is_array() && static_cast<int>(v.size()) == d) {
    for (int i = 0; i < d; ++i) {
      const auto row = get_vector(v[i], path + "[" + std::to_string(i) + "]", d);
      for (int j = 0; j < d; ++j) m(i, j) = row[j];
    }
  } else {
    throw ValidationError(path, "expected a number, a diagonal or a " + std::to_string(d) + "x" +
                                    std::to_string(d) + " matrix");
  }
  if (!(m - m.transpose()).isZero(0.0)) throw ValidationError(path, "must be symmetric");
  Eigen::SelfAdjointEigenSolver<TraitMatrix> es(m);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw ValidationError(path, "must be positive definite");
  return m;
}

std::pair<double, double> eig_range(const TraitMatrix& m) {
  Eigen::SelfAdjointEigenSolver<TraitMatrix> es(m);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

Box Scenario::box() const { return Box{to_point(grid.lower), to_point(grid.upper)}; }

TraitGrid Scenario::build_grid() const {
  return concentra::build_grid(grid.dimension, to_point(grid.lower), to_point(grid.upper), grid.points);
}

GrowthModel Scenario::build_model() const {
  if (model.kind == "global") return make_global_family(model.family, model.params, box());
  return make_local_family(model.family, model.params, box());
}

DiffusionCoefficient Scenario::build_diffusion() const {
  return make_diffusion_family(diffusion.family, diffusion.params, box());
}

Scenario Scenario::from_json(const json& j) {
  allow_keys(j, "", {"name", "description", "model", "grid", "config", "u0", "probes", "constants",
                     "canonical", "diagnostics"});
  Scenario s;
  if (!j.contains("name")) throw ValidationError("name", "is required");
  s.name = get_string(j, "", "name", "");
  if (s.name.empty() || s.name.find_first_of("/\\ ") != std::string::npos)
    throw ValidationError("name", "must be a non-empty identifier without spaces or slashes");
  s.description = get_string(j, "", "description", "");

  // grid first: the model families need the dimension and the box
  if (!j.contains("grid")) throw ValidationError("grid", "is required");
  const json& g = j.at("grid");
  allow_keys(g, "grid", {"dimension", "lower", "upper", "points_per_axis"});
  s.grid.dimension = get_int(g, "grid", "dimension", 2);
  if (s.grid.dimension != 1 && s.grid.dimension != 2)
    throw ValidationError("grid.dimension", "must be 1 or 2");
  const int d = s.grid.dimension;
  s.grid.lower = g.contains("lower") ? get_vector(g.at("lower"), "grid.lower", d) : std::vector<double>(d, 0.0);
  s.grid.upper = g.contains("upper") ? get_vector(g.at("upper"), "grid.upper", d) : std::vector<double>(d, 1.0);
  for (int i = 0; i < d; ++i)
    if (!(s.grid.upper[i] > s.grid.lower[i]))
      throw ValidationError("grid.upper", "must exceed grid.lower on every axis");
  {
    const json p = g.contains("points_per_axis") ? g.at("points_per_axis") : json(100);
    if (p.is_number_integer()) {
      s.grid.points.assign(d, p.get<int>());
    } else if (p.is_array() && static_cast<int>(p.size()) == d) {
      for (const auto& v : p) {
        if (!v.is_number_integer()) throw ValidationError("grid.points_per_axis", "expected integers");
        s.grid.points.push_back(v.get<int>());
      }
    } else {
      throw ValidationError("grid.points_per_axis", "expected an integer or one per axis");
    }
    for (int n : s.grid.points)
      if (n < 8) throw ValidationError("grid.points_per_axis", "needs at least 8 points per axis");
  }

  if (!j.contains("model")) throw ValidationError("model", "is required");
  const json& m = j.at("model");
  allow_keys(m, "model", {"kind", "family", "params", "diffusion"});
  s.model.kind = get_string(m, "model", "kind", "global");
  if (s.model.kind != "global" && s.model.kind != "local")
    throw ValidationError("model.kind", "must be 'global' or 'local'");
  s.model.family = get_string(m, "model", "family", "");
  const json params = m.contains("params") ? m.at("params") : json::object();
  if (!params.is_object()) throw ValidationError("model.params", "expected an object");
  s.model.params = s.model.kind == "global" ? resolved_global_params(s.model.family, params, d)
                                            : resolved_local_params(s.model.family, params, d);
  if (m.contains("diffusion")) {
    const json& df = m.at("diffusion");
    allow_keys(df, "model.diffusion", {"family", "params"});
    s.diffusion.family = get_string(df, "model.diffusion", "family", "constant");
    const json dp = df.contains("params") ? df.at("params") : json::object();
    if (!dp.is_object()) throw ValidationError("model.diffusion.params", "expected an object");
    s.diffusion.params = dp;
  }
  s.diffusion.params = resolved_diffusion_params(s.diffusion.family, s.diffusion.params);

  const json c = j.contains("config") ? j.at("config") : json::object();
  allow_keys(c, "config", {"epsilon", "dt", "steps", "model_variant", "snapshot_every", "mass_target",
                           "solver", "cg_tolerance", "cg_max_iterations", "picard_iterations",
                           "diffusion", "boundary"});
  auto& cfg = s.config;
  cfg.epsilon = get_number(c, "config", "epsilon", cfg.epsilon);
  cfg.dt = get_number(c, "config", "dt", cfg.dt);
  cfg.steps = get_int(c, "config", "steps", cfg.steps);
  {
    const std::string inferred = s.model.kind == "local"         ? "local"
                                 : s.diffusion.family != "constant" ? "variable_diffusion"
                                                                   : "global";
    cfg.variant = parse_variant(get_string(c, "config", "model_variant", inferred));
  }
  cfg.snapshot_every = get_int(c, "config", "snapshot_every", cfg.snapshot_every);
  cfg.mass_target = get_number(c, "config", "mass_target", cfg.mass_target);
  cfg.solver = parse_solver(get_string(c, "config", "solver", to_string(cfg.solver)));
  cfg.cg_tolerance = get_number(c, "config", "cg_tolerance", cfg.cg_tolerance);
  cfg.cg_max_iterations = get_int(c, "config", "cg_max_iterations", cfg.cg_max_iterations);
  cfg.picard_iterations = get_int(c, "config", "picard_iterations", cfg.picard_iterations);
  cfg.diffusion = get_bool(c, "config", "diffusion", cfg.diffusion);
  if (get_string(c, "config", "boundary", "no_flux") != "no_flux")
    throw ValidationError("config.boundary", "only 'no_flux' is supported");
  cfg.validate();
  if ((s.model.kind == "local") != (cfg.variant == ModelVariant::Local))
    throw ValidationError("config.model_variant", "does not match model.kind");

  if (!j.contains("u0")) throw ValidationError("u0", "is required");
  const json& u = j.at("u0");
  if (!u.is_array() || u.empty()) throw ValidationError("u0", "expected a non-empty list of bumps");
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::string path = "u0[" + std::to_string(k) + "]";
    allow_keys(u[k], path, {"center", "form", "weight"});
    if (!u[k].contains("center")) throw ValidationError(path + ".center", "is required");
    QuadraticBump b;
    b.center = to_point(get_vector(u[k].at("center"), path + ".center", d));
    b.form = parse_form(u[k].contains("form") ? u[k].at("form") : json(1.0), path + ".form", d);
    b.weight = get_number(u[k], path, "weight", 1.0);
    if (!(b.weight > 0.0)) throw ValidationError(path + ".weight", "must be positive");
    s.u0.push_back(b);
  }

  const json pr = j.contains("probes") ? j.at("probes") : json::object();
  allow_keys(pr, "probes", {"steps", "multi_max"});
  if (pr.contains("steps")) {
    if (!pr.at("steps").is_array()) throw ValidationError("probes.steps", "expected a list of steps");
    for (const auto& v : pr.at("steps")) {
      if (!v.is_number_integer() || v.get<int>() < 0 || v.get<int>() > cfg.steps)
        throw ValidationError("probes.steps", "entries must be integers in [0, config.steps]");
      s.probes.steps.push_back(v.get<int>());
    }
    std::sort(s.probes.steps.begin(), s.probes.steps.end());
    s.probes.steps.erase(std::unique(s.probes.steps.begin(), s.probes.steps.end()), s.probes.steps.end());
  } else {
    s.probes.steps = {0, cfg.steps / 2, cfg.steps};
    s.probes.steps.erase(std::unique(s.probes.steps.begin(), s.probes.steps.end()), s.probes.steps.end());
  }
  s.probes.multi_max = get_bool(pr, "probes", "multi_max", s.u0.size() > 1);

  if (j.contains("constants")) {
    s.constants = j.at("constants");
    constants_from_json(s.constants, d);  // validates names and types
  }

  const json cn = j.contains("canonical") ? j.at("canonical") : json::object();
  allow_keys(cn, "canonical", {"closure", "dt", "T"});
  s.canonical.closure = parse_closure(get_string(cn, "canonical", "closure", "from_pde"));
  s.canonical.dt = get_number(cn, "canonical", "dt", cfg.dt);
  s.canonical.T = get_number(cn, "canonical", "T", cfg.dt * cfg.steps);
  if (!(s.canonical.dt > 0.0)) throw ValidationError("canonical.dt", "must be positive");
  if (!(s.canonical.T >= 0.0)) throw ValidationError("canonical.T", "must be nonnegative");

  const json dg = j.contains("diagnostics") ? j.at("diagnostics") : json::object();
  allow_keys(dg, "diagnostics", {"t_layer", "assumptions", "regularity", "canonical", "samples"});
  s.diagnostics.t_layer = get_number(dg, "diagnostics", "t_layer", 10.0 * cfg.dt);
  s.diagnostics.assumptions = get_bool(dg, "diagnostics", "assumptions", true);
  s.diagnostics.regularity = get_bool(dg, "diagnostics", "regularity", true);
  s.diagnostics.canonical = get_bool(dg, "diagnostics", "canonical", true);
  s.diagnostics.samples = get_int(dg, "diagnostics", "samples", 64);
  if (s.diagnostics.t_layer < 0.0) throw ValidationError("diagnostics.t_layer", "must be nonnegative");
  if (s.diagnostics.samples < 2) throw ValidationError("diagnostics.samples", "must be at least 2");

  // family construction validates the parameters against the box
  (void)s.build_model();
  (void)s.build_diffusion();
  return s;
}

json Scenario::to_json() const {
  json u = json::array();
  for (const auto& b : u0)
    u.push_back({{"center", point_json(b.center)}, {"form", matrix_json(b.form)}, {"weight", b.weight}});
  return {{"name", name},
          {"description", description},
          {"model",
           {{"kind", model.kind},
            {"family", model.family},
            {"params", model.params},
            {"diffusion", {{"family", diffusion.family}, {"params", diffusion.params}}}}},
          {"grid",
           {{"dimension", grid.dimension},
            {"lower", grid.lower},
            {"upper", grid.upper},
            {"points_per_axis", grid.points}}},
          {"config", config.to_json()},
          {"u0", u},
          {"probes", {{"steps", probes.steps}, {"multi_max", probes.multi_max}}},
          {"constants", constants},
          {"canonical", {{"closure", to_string(canonical.closure)}, {"dt", canonical.dt}, {"T", canonical.T}}},
          {"diagnostics",
           {{"t_layer", diagnostics.t_layer},
            {"assumptions", diagnostics.assumptions},
            {"regularity", diagnostics.regularity},
            {"canonical", diagnostics.canonical},
            {"samples", diagnostics.samples}}}};
}

std::string Scenario::hash() const { return git_blob_hash(to_json().dump()); }

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open scenario file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario file " + file.string() + " is not valid JSON: " + e.what());
  }
  return Scenario::from_json(j);
}

InitialProfile initial_profile(const std::vector<QuadraticBump>& u0, double epsilon,
                               double mass_constant, double initial_I) {
  InitialProfile p;
  const double shift = epsilon * std::log(mass_constant);
  p.u0 = [u0, epsilon, shift](const TraitPoint& x) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& b : u0) top = std::max(top, b.phase(x) + epsilon * std::log(b.weight));
    double sum = 0.0;
    for (const auto& b : u0) sum += std::exp((b.phase(x) + epsilon * std::log(b.weight) - top) / epsilon);
    return top + epsilon * std::log(sum) + shift;
  };
  // Hessian of the log-sum-exp: mixture of the bump Hessians plus the gradient covariance over ε.
  p.hess_u0 = [u0, epsilon](const TraitPoint& x) {
    const int d = static_cast<int>(x.size());
    std::vector<double> logits;
    for (const auto& b : u0) logits.push_back((b.phase(x) + epsilon * std::log(b.weight)) / epsilon);
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - top));
    TraitMatrix h = TraitMatrix::Zero(d, d);
    TraitMatrix outer = TraitMatrix::Zero(d, d);
    TraitPoint mean = TraitPoint::Zero(d);
    for (std::size_t k = 0; k < u0.size(); ++k) {
      const double w = logits[k] / z;
      const TraitPoint g = -2.0 * u0[k].form * (x - u0[k].center);
      h += w * (-2.0 * u0[k].form);
      outer += w * g * g.transpose();
      mean += w * g;
    }
    return TraitMatrix(h + (outer - mean * mean.transpose()) / epsilon);
  };
  p.x0 = u0.front().center;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& b : u0)
    if (std::log(b.weight) > best) {
      best = std::log(b.weight);
      p.x0 = b.center;
    }
  p.initial_I = initial_I;
  return p;
}

json to_json(const AssumptionConstants& c) {
  return {{"origin", point_json(c.origin)},
          {"I_M", c.I_M},
          {"I_0", c.I_0},
          {"rho_M", c.rho_M},
          {"K_bar_0", c.K_bar_0},
          {"K_bar_1", c.K_bar_1},
          {"K_under_1", c.K_under_1},
          {"K_bar_2", c.K_bar_2},
          {"K_under_2", c.K_under_2},
          {"K_3", c.K_3},
          {"L_bar_0", c.L_bar_0},
          {"L_bar_1", c.L_bar_1},
          {"L_under_0", c.L_under_0},
          {"L_under_1", c.L_under_1},
          {"C_grad_u", c.C_grad_u},
          {"K_bar_b", c.K_bar_b},
          {"K_under_b", c.K_under_b},
          {"K_bar_1_prime", c.K_bar_1_prime},
          {"K_under_1_prime", c.K_under_1_prime},
          {"K_bar_0_prime", c.K_bar_0_prime}};
}

namespace {

void apply_overrides(AssumptionConstants& c, const json& j, int dimension) {
  if (!j.is_object()) throw ValidationError("constants", "expected an object");
  std::pair<const char*, double*> fields[] = {
      {"I_M", &c.I_M},         {"I_0", &c.I_0},         {"rho_M", &c.rho_M},
      {"K_bar_0", &c.K_bar_0}, {"K_bar_1", &c.K_bar_1}, {"K_under_1", &c.K_under_1},
      {"K_bar_2", &c.K_bar_2}, {"K_under_2", &c.K_under_2}, {"K_3", &c.K_3},
      {"L_bar_0", &c.L_bar_0}, {"L_bar_1", &c.L_bar_1}, {"L_under_0", &c.L_under_0},
      {"L_under_1", &c.L_under_1}, {"C_grad_u", &c.C_grad_u}, {"K_bar_b", &c.K_bar_b},
      {"K_under_b", &c.K_under_b}, {"K_bar_1_prime", &c.K_bar_1_prime},
      {"K_under_1_prime", &c.K_under_1_prime}, {"K_bar_0_prime", &c.K_bar_0_prime}};
  for (const auto& [key, value] : j.items()) {
    if (key == "origin") {
      c.origin = to_point(get_vector(value, "constants.origin", dimension));
      continue;
    }
    bool known = false;
    for (auto& [name, ptr] : fields) {
      if (key != name) continue;
      if (!value.is_number()) throw ValidationError("constants." + key, "expected a number");
      *ptr = value.get<double>();
      known = true;
    }
    if (!known) throw ValidationError("constants." + key, "unknown constant");
  }
}

/// Five-point Laplacian with a step fixed relative to the box.
double fd_laplacian(const PointFn& f, const TraitPoint& x, double h) {
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    TraitPoint a = x, b = x;
    a[i] += h;
    b[i] -= h;
    acc += (f(a) - 2.0 * f(x) + f(b)) / (h * h);
  }
  return acc;
}

}  // namespace

AssumptionConstants constants_from_json(const json& j, int dimension) {
  AssumptionConstants c;
  c.origin = TraitPoint::Zero(dimension);
  apply_overrides(c, j, dimension);
  return c;
}

AssumptionConstants derive_constants(const Scenario& scenario, const GrowthModel& model,
                                     double mass_constant, double initial_I) {
  const Box box = scenario.box();
  const int d = box.dimension();
  const auto xs = sample_box(box, scenario.diagnostics.samples);
  const double eps = scenario.config.epsilon;
  constexpr double inf = std::numeric_limits<double>::infinity();
  AssumptionConstants c;
  c.I_0 = initial_I;
  const bool fixed_origin = scenario.constants.contains("origin");
  if (fixed_origin) c.origin = to_point(get_vector(scenario.constants.at("origin"), "constants.origin", d));

  if (const auto* g = std::get_if<GlobalInteractionModel>(&model)) {
    c.I_M = g->i_max;
    // the point where R(., I_M) attains its maximum, zero by construction of I_M
    double best = -inf;
    auto candidates = xs;
    candidates.push_back(box.center());
    if (const Attractor at = long_time_attractor(model, box); at.found) candidates.push_back(at.point);
    for (const auto& x : candidates) {
      const double r = g->rate(x, c.I_M);
      if (r > best && !fixed_origin) {
        best = r;
        c.origin = x;
      }
    }
    double hmax = -inf, hmin = inf, di_max = -inf, di_min = inf, lap_min = inf;
    const double h = 1e-3 * (box.upper - box.lower).maxCoeff();
    for (const auto& x : xs)
      for (double I : {0.0, c.I_M}) {
        const auto [lo, hi] = eig_range(g->hess_x_rate(x, I));
        hmax = std::max(hmax, hi);
        hmin = std::min(hmin, lo);
        const double dI = g->d_rate_dI(x, I);
        di_max = std::max(di_max, dI);
        di_min = std::min(di_min, dI);
      }
    const PointFn psiR = [g, I_M = c.I_M](const TraitPoint& y) {
      return (g->weight ? g->weight(y) : 1.0) * g->rate(y, I_M);
    };
    for (const auto& x : xs) {
      const TraitPoint y = x.array().max(box.lower.array() + h).min(box.upper.array() - h).matrix();
      lap_min = std::min(lap_min, fd_laplacian(psiR, y, h));
    }
    c.K_bar_1 = -0.5 * hmax;
    c.K_under_1 = -0.5 * hmin;
    c.K_bar_2 = -di_max;
    c.K_under_2 = -di_min;
    c.K_3 = std::max(0.0, -lap_min);
    double k0 = -inf;
    for (const auto& x : xs) {
      const double r2 = (x - c.origin).squaredNorm();
      k0 = std::max(k0, g->rate(x, 0.0) + c.K_bar_1 * r2);
      if (r2 > 0.0) c.K_under_1 = std::max(c.K_under_1, -g->rate(x, c.I_M) / r2);
    }
    c.K_bar_0 = k0;
  } else {
    const auto& m = std::get<LocalCompetitionModel>(model);
    const auto ys = sample_box(box, d == 1 ? std::min(scenario.diagnostics.samples * 4, 256) : 32);
    double best = -inf, rho = 0.0;
    auto candidates = xs;
    candidates.push_back(box.center());
    if (const Attractor at = long_time_attractor(model, box); at.found) candidates.push_back(at.point);
    for (const auto& x : candidates) {
      const double r = m.intrinsic_rate(x);
      if (r > best && !fixed_origin) {
        best = r;
        c.origin = x;
      }
    }
    for (const auto& x : xs) {
      const double r = m.intrinsic_rate(x);
      for (const auto& y : ys) {
        const double cxy = m.kernel(x, y);
        if (r > 0.0 && cxy > 0.0) rho = std::max(rho, r / cxy);
      }
    }
    c.rho_M = rho > 0.0 ? rho : 1.0;
    double hmax = -inf, hmin = inf;
    for (const auto& x : xs) {
      TraitMatrix pos = TraitMatrix::Zero(d, d), neg = TraitMatrix::Zero(d, d);
      for (const auto& y : ys) {
        const TraitMatrix hc = m.hess_xx_kernel(x, y);
        pos = pos.cwiseMax(hc.cwiseMax(0.0));
        neg = neg.cwiseMax((-hc).cwiseMax(0.0));
      }
      const TraitMatrix hr = m.hess_intrinsic(x);
      hmax = std::max(hmax, eig_range(TraitMatrix(hr + neg * c.rho_M)).second);
      hmin = std::min(hmin, eig_range(TraitMatrix(hr - pos * c.rho_M)).first);
    }
    c.K_bar_1_prime = -0.5 * hmax;
    c.K_under_1_prime = -0.5 * hmin;
    double k0 = -inf;
    for (const auto& x : xs) {
      const double r = m.intrinsic_rate(x);
      const double r2 = (x - c.origin).squaredNorm();
      k0 = std::max(k0, r + c.K_bar_1_prime * r2);
    }
    c.K_bar_0_prime = k0;
    c.I_M = c.rho_M;
  }

  // initial data: extreme curvatures of u0 and the tightest offsets for them
  const InitialProfile init = initial_profile(scenario.u0, eps, mass_constant, initial_I);
  double lb = inf, lu = -inf;
  for (const auto& x : xs) {
    const auto [lo, hi] = eig_range(init.hess_u0(x));
    lb = std::min(lb, -0.5 * hi);
    lu = std::max(lu, -0.5 * lo);
  }
  c.L_bar_1 = lb;
  c.L_under_1 = lu;
  const TraitPoint origin = c.origin;
  double l0 = -inf, l0u = -inf;
  for (const auto& x : xs) {
    const double u = init.u0(x);
    const double r2 = (x - origin).squaredNorm();
    l0 = std::max(l0, u + c.L_bar_1 * r2);
    l0u = std::max(l0u, -u - c.L_under_1 * r2);
  }
  c.L_bar_0 = l0;
  c.L_under_0 = l0u;

  apply_overrides(c, scenario.constants, d);
  return c;
}

json to_json(const AssumptionReport& report) {
  json items = json::array();
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  };
  for (const auto& it : report.items) {
    json e = {{"name", it.name},
              {"passed", it.passed},
              {"margin", num(it.margin)},
              {"concavity", it.concavity},
              {"detail", it.detail}};
    e["worst_point"] = it.worst_point ? point_json(*it.worst_point) : json(nullptr);
    items.push_back(e);
  }
  return {{"all_passed", report.all_passed()}, {"items", items}, {"warnings", report.warnings}};
}

}  // namespace concentra
