#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drbf/datagen.hpp"
#include "drbf/errors.hpp"
#include "drbf/experiment.hpp"
#include "drbf/training.hpp"

// JSON configuration for the generate, train and evaluate front ends. Absent
// keys keep their defaults; unknown keys are rejected by name.

namespace drbf {

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: field '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& what)
{
    if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
    for (const auto& item : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; });
        if (!ok) throw ValidationError(what + ": unknown field '" + item.key() + "'");
    }
}

} // namespace detail

/// Geometry and boundary data of a test setting: i and ii on the square
/// [-1, 1]^2 with zero data, iii on the unit disk and iv on the annulus
/// 0.5 < |x| < 1, both with the angular preset.
inline void apply_setting(GenerateConfig& cfg, TestSetting s)
{
    cfg.setting = to_string(s);
    switch (s) {
    case TestSetting::same_sites:
    case TestSetting::other_count:
        cfg.domain = Domain::square(1.0);
        cfg.boundary = BoundarySpec::zero();
        break;
    case TestSetting::disk:
        cfg.domain = Domain::disk(1.0);
        cfg.boundary = BoundarySpec::angular();
        break;
    case TestSetting::annulus:
        cfg.domain = Domain::annulus(0.5, 1.0);
        cfg.boundary = BoundarySpec::angular();
        break;
    }
}

/// Reads generation parameters; absent keys keep their defaults. A
/// "setting" entry applies that setting's geometry and boundary data before
/// any explicit "domain" or "boundary".
inline GenerateConfig generate_config_from_json(const nlohmann::json& j, GenerateConfig cfg = {})
{
    detail::reject_unknown(j,
                           {"pde", "wave_speed", "viscosity", "reaction", "diffusivity", "domain", "boundary",
                            "n_interior", "n_boundary", "site_seed", "sequences", "steps", "dt", "resolution", "noise",
                            "grid_resolution", "seed", "setting", "bump"},
                           "generate config");
    std::string pde = to_string(cfg.pde.kind);
    detail::read_opt(j, "pde", pde);
    cfg.pde.kind = pde_kind_from_string(pde);
    detail::read_opt(j, "wave_speed", cfg.pde.wave_speed);
    detail::read_opt(j, "viscosity", cfg.pde.viscosity);
    detail::read_opt(j, "reaction", cfg.pde.reaction);
    detail::read_opt(j, "diffusivity", cfg.pde.diffusivity);
    if (j.contains("setting")) {
        std::string setting;
        detail::read_opt(j, "setting", setting);
        apply_setting(cfg, test_setting_from_string(setting));
    }
    if (j.contains("domain")) cfg.domain = domain_from_json(j["domain"], "config");
    std::string bc = cfg.boundary.name();
    detail::read_opt(j, "boundary", bc);
    cfg.boundary = BoundarySpec::from_string(bc);
    detail::read_opt(j, "n_interior", cfg.n_interior);
    detail::read_opt(j, "n_boundary", cfg.n_boundary);
    detail::read_opt(j, "site_seed", cfg.site_seed);
    detail::read_opt(j, "sequences", cfg.sequences);
    detail::read_opt(j, "steps", cfg.steps);
    detail::read_opt(j, "dt", cfg.dt);
    detail::read_opt(j, "resolution", cfg.resolution);
    detail::read_opt(j, "noise", cfg.noise);
    detail::read_opt(j, "grid_resolution", cfg.grid_resolution);
    detail::read_opt(j, "seed", cfg.seed);
    if (j.contains("bump")) {
        BumpRanges r = cfg.bump_ranges();
        const auto& b = j["bump"];
        detail::read_opt(b, "amplitude_min", r.amplitude_min);
        detail::read_opt(b, "amplitude_max", r.amplitude_max);
        detail::read_opt(b, "sharpness_min", r.sharpness_min);
        detail::read_opt(b, "sharpness_max", r.sharpness_max);
        detail::read_opt(b, "center_margin", r.center_margin);
        cfg.bump = r;
    }
    return cfg;
}


/// Reads training parameters; `residual_sites` is "all" or "left_out".
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg = {})
{
    detail::reject_unknown(j,
                           {"epochs", "batch_size", "learning_rate", "lambda", "features", "linear", "loo",
                            "residual_sites", "validation_fraction", "seed", "sigma0", "lnet_hidden", "fnet_hidden",
                            "divergence_factor"},
                           "train config");
    detail::read_opt(j, "epochs", cfg.epochs);
    detail::read_opt(j, "batch_size", cfg.batch_size);
    detail::read_opt(j, "learning_rate", cfg.learning_rate);
    detail::read_opt(j, "lambda", cfg.lambda);
    detail::read_opt(j, "features", cfg.features);
    detail::read_opt(j, "linear", cfg.linear);
    detail::read_opt(j, "loo", cfg.loo_enabled);
    std::string residual = cfg.residual_sites == ResidualSites::all ? "all" : "left_out";
    detail::read_opt(j, "residual_sites", residual);
    if (residual == "all")
        cfg.residual_sites = ResidualSites::all;
    else if (residual == "left_out")
        cfg.residual_sites = ResidualSites::left_out_only;
    else
        throw ValidationError("train config: residual_sites must be 'all' or 'left_out'");
    detail::read_opt(j, "validation_fraction", cfg.validation_fraction);
    detail::read_opt(j, "seed", cfg.seed);
    if (j.contains("sigma0") && !j["sigma0"].is_null()) {
        double s = 0.0;
        detail::read_opt(j, "sigma0", s);
        cfg.sigma0 = s;
    }
    detail::read_opt(j, "lnet_hidden", cfg.lnet_hidden);
    detail::read_opt(j, "fnet_hidden", cfg.fnet_hidden);
    detail::read_opt(j, "divergence_factor", cfg.divergence_factor);
    if (cfg.epochs < 1) throw ValidationError("train config: epochs must be at least 1");
    if (cfg.batch_size < 1) throw ValidationError("train config: batch_size must be at least 1");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be positive");
    if (cfg.lambda < 0.0) throw ValidationError("train config: lambda must be non-negative");
    if (cfg.features < 1) throw ValidationError("train config: features must be at least 1");
    if (cfg.validation_fraction < 0.0 || cfg.validation_fraction >= 1.0)
        throw ValidationError("train config: validation_fraction must lie in [0, 1)");
    if (cfg.sigma0 && !(*cfg.sigma0 > 0.0)) throw ValidationError("train config: sigma0 must be positive");
    return cfg;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c)
{
    nlohmann::json j{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"lambda", c.lambda},
                     {"features", c.features},
                     {"linear", c.linear},
                     {"loo", c.loo_enabled},
                     {"residual_sites", c.residual_sites == ResidualSites::all ? "all" : "left_out"},
                     {"validation_fraction", c.validation_fraction},
                     {"seed", c.seed},
                     {"lnet_hidden", c.lnet_hidden},
                     {"fnet_hidden", c.fnet_hidden},
                     {"divergence_factor", c.divergence_factor}};
    j["sigma0"] = c.sigma0 ? nlohmann::json(*c.sigma0) : nlohmann::json(nullptr);
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig cfg = {})
{
    detail::reject_unknown(j,
                           {"dataset", "model", "setting", "horizon", "start", "sequences", "metrics", "summary",
                            "trajectories", "seed"},
                           "evaluate config");
    detail::read_opt(j, "dataset", cfg.dataset_path);
    detail::read_opt(j, "model", cfg.model_path);
    std::string setting = to_string(cfg.setting);
    detail::read_opt(j, "setting", setting);
    cfg.setting = test_setting_from_string(setting);
    detail::read_opt(j, "horizon", cfg.horizon);
    detail::read_opt(j, "start", cfg.start);
    detail::read_opt(j, "sequences", cfg.sequences);
    detail::read_opt(j, "metrics", cfg.metrics_csv);
    detail::read_opt(j, "summary", cfg.summary_json);
    detail::read_opt(j, "trajectories", cfg.trajectory_prefix);
    if (cfg.dataset_path.empty()) throw ValidationError("evaluate config: missing field 'dataset'");
    if (cfg.model_path.empty()) throw ValidationError("evaluate config: missing field 'model'");
    return cfg;
}

} // namespace drbf
