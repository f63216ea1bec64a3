#include "concentra/families.hpp"

#include "concentra/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace concentra {

using nlohmann::json;

namespace {

double number(const json& p, const std::string& key, const std::string& path) {
  if (!p.contains(key)) throw ValidationError(path + "." + key, "missing parameter");
  if (!p[key].is_number()) throw ValidationError(path + "." + key, "expected a number");
  return p[key].get<double>();
}

json vector_param(const json& p, const std::string& key, int d, const std::string& path,
                  double fallback) {
  if (!p.contains(key)) return json(std::vector<double>(d, fallback));
  const auto& v = p[key];
  if (v.is_number()) return json(std::vector<double>(d, v.get<double>()));
  if (!v.is_array() || static_cast<int>(v.size()) != d)
    throw ValidationError(path + "." + key, "expected a number or an array of length " +
                                                std::to_string(d));
  for (const auto& e : v)
    if (!e.is_number()) throw ValidationError(path + "." + key, "expected numbers");
  return v;
}

TraitPoint to_point(const json& v) {
  TraitPoint p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  return p;
}

void reject_unknown(const json& p, std::initializer_list<const char*> known,
                    const std::string& path) {
  if (!p.is_object()) throw ValidationError(path, "expected an object");
  for (auto it = p.begin(); it != p.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ValidationError(path + "." + it.key(), "unknown parameter");
  }
}

void require_dimension(int d, int wanted, const std::string& family) {
  if (d != wanted)
    throw ValidationError("model.family", family + " is defined only in dimension " +
                                              std::to_string(wanted));
}

double box_max_of(const Box& box, const std::function<double(const TraitPoint&)>& f,
                  const std::optional<TraitPoint>& extra = std::nullopt) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : sample_box(box, box.dimension() == 1 ? 1025 : 257)) best = std::max(best, f(x));
  if (extra && box.contains(*extra)) best = std::max(best, f(*extra));
  return best;
}

void finish_i_max(GlobalInteractionModel& m, const Box& box, double kappa,
                  const std::optional<TraitPoint>& extra = std::nullopt) {
  if (kappa > 0.0) {
    const auto rate = m.rate;
    m.i_max = box_max_of(box, [&](const TraitPoint& x) { return rate(x, 0.0) / kappa; }, extra);
  }
  if (!(m.i_max > 0.0)) m.i_max = 1.0;
}

}  // namespace

const std::vector<std::string>& global_family_names() {
  static const std::vector<std::string> names{"affine", "quadratic", "half_ridge", "elliptic"};
  return names;
}

const std::vector<std::string>& local_family_names() {
  static const std::vector<std::string> names{"logistic"};
  return names;
}

const std::vector<std::string>& diffusion_family_names() {
  static const std::vector<std::string> names{"constant", "sine", "affine"};
  return names;
}

json resolved_global_params(const std::string& family, const json& params, int d) {
  const std::string path = "model.params";
  const json p = params.is_null() ? json::object() : params;
  json out;
  if (family == "affine") {
    reject_unknown(p, {"a0", "kappa", "slope", "center", "psi"}, path);
    out["a0"] = number(p, "a0", path);
    out["kappa"] = p.value("kappa", 1.0);
    out["slope"] = vector_param(p, "slope", d, path, 0.0);
    out["center"] = vector_param(p, "center", d, path, 0.0);
  } else if (family == "quadratic") {
    reject_unknown(p, {"k0", "kappa", "curvature", "center", "psi"}, path);
    out["k0"] = number(p, "k0", path);
    out["kappa"] = p.value("kappa", 1.0);
    out["curvature"] = vector_param(p, "curvature", d, path, 1.0);
    out["center"] = vector_param(p, "center", d, path, 0.0);
  } else if (family == "half_ridge") {
    require_dimension(d, 2, family);
    reject_unknown(p, {"a0", "kappa", "ridge", "level", "slope", "slope_origin", "psi"}, path);
    out["a0"] = p.value("a0", 0.9);
    out["kappa"] = p.value("kappa", 1.0);
    out["ridge"] = p.value("ridge", 5.0);
    out["level"] = p.value("level", 0.3);
    out["slope"] = p.value("slope", 2.3);
    out["slope_origin"] = p.value("slope_origin", 0.3);
  } else if (family == "elliptic") {
    require_dimension(d, 2, family);
    reject_unknown(p, {"a0", "kappa", "s", "re", "psi"}, path);
    out["a0"] = p.value("a0", 3.0);
    out["kappa"] = p.value("kappa", 1.5);
    out["s"] = p.value("s", 5.6);
    out["re"] = p.value("re", 1.0);
  } else {
    throw ValidationError("model.family", "unknown global family '" + family + "'");
  }
  out["psi"] = p.value("psi", 1.0);
  if (!(out["psi"].get<double>() > 0.0)) throw ValidationError(path + ".psi", "must be positive");
  if (out["kappa"].get<double>() < 0.0)
    throw ValidationError(path + ".kappa", "must be nonnegative");
  return out;
}

GlobalInteractionModel make_global_family(const std::string& family, const json& params,
                                          const Box& box) {
  const int d = box.dimension();
  const json p = resolved_global_params(family, params, d);
  GlobalInteractionModel m;
  m.name = family;
  m.dimension = d;
  const double kappa = p["kappa"].get<double>();
  const double psi = p["psi"].get<double>();
  m.weight = [psi](const TraitPoint&) { return psi; };
  m.d_rate_dI = [kappa](const TraitPoint&, double) { return -kappa; };
  std::optional<TraitPoint> extra;

  if (family == "affine") {
    const double a0 = p["a0"].get<double>();
    const TraitPoint g = to_point(p["slope"]);
    const TraitPoint c = to_point(p["center"]);
    m.rate = [=](const TraitPoint& x, double I) { return a0 - kappa * I + g.dot(x - c); };
    m.grad_x_rate = [=](const TraitPoint&, double) { return g; };
    m.hess_x_rate = [d](const TraitPoint&, double) { return TraitMatrix(TraitMatrix::Zero(d, d)); };
  } else if (family == "quadratic" || family == "elliptic") {
    double k0;
    TraitPoint curv, c;
    if (family == "quadratic") {
      k0 = p["k0"].get<double>();
      curv = to_point(p["curvature"]);
      c = to_point(p["center"]);
    } else {
      k0 = p["a0"].get<double>();
      const double s = p["s"].get<double>();
      curv = make_point(-s * p["re"].get<double>(), -s);
      c = TraitPoint::Zero(2);
    }
    extra = c;
    m.rate = [=](const TraitPoint& x, double I) {
      return k0 - kappa * I - (curv.array() * (x - c).array().square()).sum();
    };
    m.grad_x_rate = [=](const TraitPoint& x, double) {
      return TraitPoint(-2.0 * curv.array() * (x - c).array());
    };
    m.hess_x_rate = [=](const TraitPoint&, double) {
      return TraitMatrix((-2.0 * curv).asDiagonal());
    };
  } else if (family == "half_ridge") {
    const double a0 = p["a0"].get<double>();
    const double ridge = p["ridge"].get<double>();
    const double level = p["level"].get<double>();
    const double slope = p["slope"].get<double>();
    const double x0 = p["slope_origin"].get<double>();
    m.rate = [=](const TraitPoint& x, double I) {
      const double up = std::max(x[1] - level, 0.0);
      return a0 - kappa * I + ridge * up * up + slope * (x[0] - x0);
    };
    m.grad_x_rate = [=](const TraitPoint& x, double) {
      return make_point(slope, 2.0 * ridge * std::max(x[1] - level, 0.0));
    };
    m.hess_x_rate = [=](const TraitPoint& x, double) {
      TraitMatrix H = TraitMatrix::Zero(2, 2);
      H(1, 1) = x[1] > level ? 2.0 * ridge : 0.0;
      return H;
    };
  }
  finish_i_max(m, box, kappa, extra);
  return m;
}

json resolved_local_params(const std::string& family, const json& params, int d) {
  const std::string path = "model.params";
  const json p = params.is_null() ? json::object() : params;
  if (family != "logistic")
    throw ValidationError("model.family", "unknown local family '" + family + "'");
  reject_unknown(p, {"r0", "s", "center", "kernel"}, path);
  json out;
  out["r0"] = p.value("r0", 1.0);
  out["s"] = p.value("s", 1.0);
  out["center"] = vector_param(p, "center", d, path, 0.0);
  json k = p.value("kernel", json{{"type", "constant"}});
  reject_unknown(k, {"type", "c0", "sigma"}, path + ".kernel");
  const std::string type = k.value("type", std::string("constant"));
  json ko;
  ko["type"] = type;
  ko["c0"] = k.value("c0", 1.0);
  if (!(ko["c0"].get<double>() > 0.0)) throw ValidationError(path + ".kernel.c0", "must be positive");
  if (type == "gaussian") {
    ko["sigma"] = k.value("sigma", 1.0);
    if (!(ko["sigma"].get<double>() > 0.0))
      throw ValidationError(path + ".kernel.sigma", "must be positive");
  } else if (type != "constant") {
    throw ValidationError(path + ".kernel.type", "unknown kernel type '" + type + "'");
  }
  out["kernel"] = ko;
  return out;
}

LocalCompetitionModel make_local_family(const std::string& family, const json& params,
                                        const Box& box) {
  const int d = box.dimension();
  const json p = resolved_local_params(family, params, d);
  LocalCompetitionModel m;
  m.name = family;
  m.dimension = d;
  const double r0 = p["r0"].get<double>();
  const double s = p["s"].get<double>();
  const TraitPoint c = to_point(p["center"]);
  m.intrinsic_rate = [=](const TraitPoint& x) { return r0 - s * (x - c).squaredNorm(); };
  m.grad_intrinsic = [=](const TraitPoint& x) { return TraitPoint(-2.0 * s * (x - c)); };
  m.hess_intrinsic = [=](const TraitPoint&) {
    return TraitMatrix(-2.0 * s * TraitMatrix::Identity(d, d));
  };
  const auto& k = p["kernel"];
  const double c0 = k["c0"].get<double>();
  m.symmetric = true;
  if (k["type"] == "constant") {
    m.kernel = [c0](const TraitPoint&, const TraitPoint&) { return c0; };
    const auto zero = [d](const TraitPoint&, const TraitPoint&) {
      return TraitPoint(TraitPoint::Zero(d));
    };
    m.grad_x_kernel = zero;
    m.grad_y_kernel = zero;
    m.hess_xx_kernel = [d](const TraitPoint&, const TraitPoint&) {
      return TraitMatrix(TraitMatrix::Zero(d, d));
    };
    m.separable = SeparableKernel{[c0](const TraitPoint&) { return c0; },
                                  [](const TraitPoint&) { return 1.0; }};
  } else {
    const double sigma = k["sigma"].get<double>();
    const double s2 = sigma * sigma;
    m.kernel = [=](const TraitPoint& x, const TraitPoint& y) {
      return c0 * std::exp(-(x - y).squaredNorm() / (2.0 * s2));
    };
    m.grad_x_kernel = [=](const TraitPoint& x, const TraitPoint& y) {
      const double v = c0 * std::exp(-(x - y).squaredNorm() / (2.0 * s2));
      return TraitPoint(-v * (x - y) / s2);
    };
    m.grad_y_kernel = [=](const TraitPoint& x, const TraitPoint& y) {
      const double v = c0 * std::exp(-(x - y).squaredNorm() / (2.0 * s2));
      return TraitPoint(v * (x - y) / s2);
    };
    m.hess_xx_kernel = [=](const TraitPoint& x, const TraitPoint& y) {
      const double v = c0 * std::exp(-(x - y).squaredNorm() / (2.0 * s2));
      const TraitPoint e = x - y;
      return TraitMatrix(v * (e * e.transpose() / (s2 * s2) - TraitMatrix::Identity(d, d) / s2));
    };
  }
  return m;
}

json resolved_diffusion_params(const std::string& family, const json& params) {
  const std::string path = "model.diffusion.params";
  const json p = params.is_null() ? json::object() : params;
  json out;
  if (family == "constant") {
    reject_unknown(p, {"b"}, path);
    out["b"] = p.value("b", 1.0);
    if (!(out["b"].get<double>() > 0.0)) throw ValidationError(path + ".b", "must be positive");
  } else if (family == "sine") {
    reject_unknown(p, {"b0", "amplitude", "frequency"}, path);
    out["b0"] = p.value("b0", 1.0);
    out["amplitude"] = p.value("amplitude", 0.5);
    out["frequency"] = p.value("frequency", 1.0);
    if (!(out["b0"].get<double>() > std::abs(out["amplitude"].get<double>())))
      throw ValidationError(path + ".amplitude", "b0 must exceed |amplitude| for positivity");
  } else if (family == "affine") {
    reject_unknown(p, {"b0", "slope"}, path);
    out["b0"] = p.value("b0", 1.0);
    out["slope"] = p.value("slope", 0.0);
  } else {
    throw ValidationError("model.diffusion.family", "unknown diffusion family '" + family + "'");
  }
  return out;
}

DiffusionCoefficient make_diffusion_family(const std::string& family, const json& params,
                                           const Box& box) {
  const int d = box.dimension();
  const json p = resolved_diffusion_params(family, params);
  DiffusionCoefficient b;
  b.name = family;
  b.constant = false;
  const auto unit = [d](double g0) {
    TraitPoint g = TraitPoint::Zero(d);
    g[0] = g0;
    return g;
  };
  if (family == "constant") {
    const double v = p["b"].get<double>();
    b.value = [v](const TraitPoint&) { return v; };
    b.grad = [unit](const TraitPoint&) { return unit(0.0); };
    b.hess_trace = [](const TraitPoint&) { return 0.0; };
    b.third_bound = 0.0;
    b.constant = (v == 1.0);
  } else if (family == "sine") {
    const double b0 = p["b0"].get<double>();
    const double a = p["amplitude"].get<double>();
    const double w = 2.0 * std::numbers::pi * p["frequency"].get<double>();
    b.value = [=](const TraitPoint& x) { return b0 + a * std::sin(w * x[0]); };
    b.grad = [=](const TraitPoint& x) { return unit(a * w * std::cos(w * x[0])); };
    b.hess_trace = [=](const TraitPoint& x) { return -a * w * w * std::sin(w * x[0]); };
    b.third_bound = std::abs(a) * w * w * w;
  } else {
    const double b0 = p["b0"].get<double>();
    const double slope = p["slope"].get<double>();
    for (const auto& x : sample_box(box, 2))
      if (!(b0 + slope * x[0] > 0.0))
        throw ValidationError("model.diffusion.params", "b must be positive on the box");
    b.value = [=](const TraitPoint& x) { return b0 + slope * x[0]; };
    b.grad = [=](const TraitPoint&) { return unit(slope); };
    b.hess_trace = [](const TraitPoint&) { return 0.0; };
    b.third_bound = 0.0;
  }
  return b;
}

}  // namespace concentra
