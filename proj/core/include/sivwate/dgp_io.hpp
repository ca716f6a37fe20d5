#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sivwate/dgp.hpp"

namespace sivwate {

// DGP specification files are JSON. Two layouts are accepted:
//
//   {"type": "latent", "covariates": [...], "x_support": [[...], ...],
//    "u_support": [...], "p_xu": [[...]], "e_z": [...],
//    "p_d": {"z0": [[...]], "z1": [[...]]}, "y_support": [...],
//    "law_y": {"d0": [[[...]]], "d1": [[[...]]]}}
//
//   {"type": "dcc", "covariates": [...], "x_support": [...], "p_x": [...],
//    "e_z": [...], "class_mix": [[never, always, complier, defier], ...],
//    "y_support": [...], "law_y": {"d0": [[[...] x4]], "d1": ...}}
//
// Categorical covariate values may be given as level labels. Errors name the
// offending field path.
LatentDgp parse_dgp_spec(std::string_view json_text);
LatentDgp load_dgp_spec(const std::filesystem::path& path);

// Latent layout; parse_dgp_spec(dgp_spec_to_json(d)) reproduces d exactly.
std::string dgp_spec_to_json(const LatentDgp& dgp);

// Sidecar written next to simulated data: population truth, assumption report,
// per-x truth and the global ATE.
std::string truth_sidecar_json(const LatentDgp& dgp);

}  // namespace sivwate
