#pragma once

#include "concentra/model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace concentra {

// Built-in growth-law families addressable by name from scenario files.
//
// global:  affine      R = a0 - kappa I + slope . (x - center)
//          quadratic   R = k0 - kappa I - sum_i curvature_i (x_i - center_i)^2
//          half_ridge  R = a0 - kappa I + ridge (x_2 - level)_+^2 + slope (x_1 - slope_origin)
//          elliptic    R = a0 - kappa I + s (x_2^2 + re x_1^2)
// local:   logistic    r = r0 - s |x - center|^2 with a constant or Gaussian kernel
// diffusion: constant, sine, affine
//
// Every global family is affine in I, so I_M is the box maximum of R(x, 0) / kappa.

GlobalInteractionModel make_global_family(const std::string& family, const nlohmann::json& params,
                                          const Box& box);
LocalCompetitionModel make_local_family(const std::string& family, const nlohmann::json& params,
                                        const Box& box);
DiffusionCoefficient make_diffusion_family(const std::string& family,
                                           const nlohmann::json& params, const Box& box);

const std::vector<std::string>& global_family_names();
const std::vector<std::string>& local_family_names();
const std::vector<std::string>& diffusion_family_names();

/// Parameter object with every default filled in, as recorded in manifests.
nlohmann::json resolved_global_params(const std::string& family, const nlohmann::json& params,
                                      int dimension);
nlohmann::json resolved_local_params(const std::string& family, const nlohmann::json& params,
                                     int dimension);
nlohmann::json resolved_diffusion_params(const std::string& family,
                                         const nlohmann::json& params);

}  // namespace concentra
