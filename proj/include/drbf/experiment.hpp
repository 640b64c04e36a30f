#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drbf/checkpoint.hpp"
#include "drbf/dataset.hpp"
#include "drbf/errors.hpp"
#include "drbf/forecast.hpp"
#include "drbf/operator_model.hpp"

namespace drbf {

inline constexpr double snr_cap_db = 150.0;

/// 10 log10(sum u^2 / sum (u - u_hat)^2) over all entries. Empty when the
/// truth is identically zero; `cap` when the error energy vanishes or the
/// ratio would exceed it.
inline std::optional<double> snr(const Matrix& truth, const Matrix& predicted, double cap = snr_cap_db)
{
    if (truth.rows() != predicted.rows() || truth.cols() != predicted.cols())
        throw ValidationError("snr: truth and prediction shapes differ");
    const double signal = truth.squaredNorm();
    if (signal == 0.0) return std::nullopt;
    const double noise = (truth - predicted).squaredNorm();
    if (noise == 0.0 || signal / noise >= std::pow(10.0, cap / 10.0)) return cap;
    return 10.0 * std::log10(signal / noise);
}

inline std::vector<Matrix> persistence_forecast(const Matrix& initial, int steps)
{
    return std::vector<Matrix>(static_cast<std::size_t>(std::max(steps, 0)), initial);
}

enum class StabilityStatus { stable, marginal, unstable };

inline std::string to_string(StabilityStatus s)
{
    switch (s) {
    case StabilityStatus::stable: return "stable";
    case StabilityStatus::marginal: return "marginal";
    case StabilityStatus::unstable: return "unstable";
    }
    return "?";
}

struct StabilityReport {
    double spectral_radius = 0.0;
    StabilityStatus status = StabilityStatus::unstable;
    bool stable() const { return status == StabilityStatus::stable; }
};

inline StabilityReport stability_from_h(const Matrix& h, double tolerance = 1e-9)
{
    StabilityReport r;
    r.spectral_radius = spectral_radius(h);
    if (std::abs(r.spectral_radius - 1.0) <= tolerance)
        r.status = StabilityStatus::marginal;
    else
        r.status = r.spectral_radius < 1.0 ? StabilityStatus::stable : StabilityStatus::unstable;
    return r;
}

inline StabilityReport stability_report(const OperatorModel& model, const SiteSet& sites, double dt,
                                        std::optional<double> lambda = std::nullopt)
{
    if (!model.is_linear() || model.order != 1)
        throw ValidationError("stability: only the linear first-order model has a transition matrix");
    return stability_from_h(build_h_matrix(model, sites.points, sites.boundary_count, dt, lambda.value_or(model.lambda)));
}

enum class TestSetting { same_sites, other_count, disk, annulus };

inline std::string to_string(TestSetting s)
{
    switch (s) {
    case TestSetting::same_sites: return "i";
    case TestSetting::other_count: return "ii";
    case TestSetting::disk: return "iii";
    case TestSetting::annulus: return "iv";
    }
    return "?";
}

inline TestSetting test_setting_from_string(const std::string& s)
{
    if (s == "i") return TestSetting::same_sites;
    if (s == "ii") return TestSetting::other_count;
    if (s == "iii") return TestSetting::disk;
    if (s == "iv") return TestSetting::annulus;
    throw ValidationError("unknown test setting '" + s + "' (expected i, ii, iii or iv)");
}

inline DomainKind setting_domain(TestSetting s)
{
    switch (s) {
    case TestSetting::disk: return DomainKind::disk;
    case TestSetting::annulus: return DomainKind::annulus;
    default: return DomainKind::square;
    }
}

/// Forecast evaluation for one test dataset. Each sequence is seeded with
/// frames [start, start + p) and compared with the following `horizon` frames.
struct ExperimentConfig {
    std::string dataset_path;
    std::string model_path;
    TestSetting setting = TestSetting::same_sites;
    int horizon = 10;
    int start = 0;
    std::vector<std::size_t> sequences; // empty: every sequence
    std::string metrics_csv;
    std::string summary_json;
    std::string trajectory_prefix; // writes <prefix>_sites.csv and <prefix>_queries.csv
};

struct SequenceForecast {
    std::string id;
    Rollout rollout;
    std::vector<double> snr_x, snr_omega, baseline_snr_x;
};

struct ForecastResult {
    std::string setting;
    std::string model_id;
    std::string dataset_id;
    std::vector<double> times;
    std::vector<SequenceForecast> sequences;
    // Means over sequences per step; undefined entries are skipped.
    std::vector<double> snr_x, snr_omega, baseline_snr_x;
    bool has_grid = false;
};

namespace detail {

inline std::vector<double> mean_trace(const std::vector<SequenceForecast>& seqs,
                                      std::vector<double> SequenceForecast::*field, std::size_t steps)
{
    std::vector<double> out(steps, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < steps; ++k) {
        double sum = 0.0;
        int count = 0;
        for (const auto& s : seqs) {
            const double v = (s.*field)[k];
            if (!std::isnan(v)) {
                sum += v;
                ++count;
            }
        }
        if (count) out[k] = sum / count;
    }
    return out;
}

inline double or_nan(std::optional<double> v) { return v.value_or(std::numeric_limits<double>::quiet_NaN()); }

} // namespace detail

inline void check_compatible(const OperatorModel& model, const Dataset& ds, TestSetting setting)
{
    if (model.dim != ds.domain.dim()) throw ValidationError("model dimension differs from the dataset dimension");
    if (model.variables != ds.variables) throw ValidationError("model variable count differs from the dataset");
    if (model.order != ds.order) throw ValidationError("model temporal order differs from the dataset");
    if (ds.domain.kind() != setting_domain(setting))
        throw ValidationError("setting " + to_string(setting) + " needs a " + to_string(setting_domain(setting)) +
                              " dataset, got " + to_string(ds.domain.kind()));
    if ((setting == TestSetting::disk || setting == TestSetting::annulus) && ds.boundary != BoundarySpec::angular())
        throw ValidationError("setting " + to_string(setting) + " needs the angular boundary preset");
}

/// Runs the forecasts of one setting in memory.
inline ForecastResult evaluate_forecasts(const OperatorModel& model, const Dataset& ds, TestSetting setting, int horizon,
                                         int start = 0, std::vector<std::size_t> which = {})
{
    check_compatible(model, ds, setting);
    if (horizon < 1) throw ValidationError("horizon must be at least 1");
    if (start < 0 || start + model.order - 1 + horizon > ds.steps())
        throw ValidationError("start + p - 1 + horizon exceeds the " + std::to_string(ds.steps()) + " recorded steps");
    if (which.empty())
        for (std::size_t s = 0; s < ds.sequences.size(); ++s) which.push_back(s);
    for (auto s : which)
        if (s >= ds.sequences.size()) throw ValidationError("sequence index " + std::to_string(s) + " out of range");

    ForecastResult res;
    res.setting = to_string(setting);
    res.has_grid = ds.grid_points.has_value();
    const PointMatrix* queries = res.has_grid ? &*ds.grid_points : nullptr;
    const int seed_last = start + model.order - 1;
    for (auto s : which) {
        const auto& seq = ds.sequences[s];
        if (res.has_grid && seq.grid_truth.size() != seq.frames.size())
            throw ValidationError("sequence " + seq.id + " lacks grid truth");
        std::vector<Matrix> initial(seq.frames.begin() + start, seq.frames.begin() + seed_last + 1);
        SequenceForecast sf;
        sf.id = seq.id;
        sf.rollout = forecast(model, ds.sites, initial, ds.boundary, horizon, ds.dt, queries, std::nullopt,
                              seed_last * ds.dt);
        const auto baseline = persistence_forecast(seq.frames[static_cast<std::size_t>(seed_last)], horizon);
        for (int k = 0; k < horizon; ++k) {
            const auto f = static_cast<std::size_t>(seed_last + k + 1);
            sf.snr_x.push_back(detail::or_nan(snr(seq.frames[f], sf.rollout.sites[static_cast<std::size_t>(k)])));
            sf.baseline_snr_x.push_back(detail::or_nan(snr(seq.frames[f], baseline[static_cast<std::size_t>(k)])));
            sf.snr_omega.push_back(
                res.has_grid ? detail::or_nan(snr(seq.grid_truth[f], sf.rollout.queries[static_cast<std::size_t>(k)]))
                             : std::numeric_limits<double>::quiet_NaN());
        }
        if (res.times.empty()) res.times = sf.rollout.times;
        res.sequences.push_back(std::move(sf));
    }
    const auto steps = static_cast<std::size_t>(horizon);
    res.snr_x = detail::mean_trace(res.sequences, &SequenceForecast::snr_x, steps);
    res.snr_omega = detail::mean_trace(res.sequences, &SequenceForecast::snr_omega, steps);
    res.baseline_snr_x = detail::mean_trace(res.sequences, &SequenceForecast::baseline_snr_x, steps);
    return res;
}

namespace detail {

inline std::string csv_number(double v)
{
    if (std::isnan(v)) return "";
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

} // namespace detail

/// step,t,snr_x,snr_omega,baseline_snr_x with the per-step means. Undefined
/// values are empty cells.
inline std::string metrics_csv(const ForecastResult& r)
{
    std::ostringstream out;
    out << "step,t,snr_x,snr_omega,baseline_snr_x\n";
    for (std::size_t k = 0; k < r.snr_x.size(); ++k)
        out << k + 1 << ',' << detail::csv_number(r.times[k]) << ',' << detail::csv_number(r.snr_x[k]) << ','
            << detail::csv_number(r.snr_omega[k]) << ',' << detail::csv_number(r.baseline_snr_x[k]) << '\n';
    return out.str();
}

/// One rollout as step,t,id,variable,value; `queries` selects the query
/// trajectory instead of the sites.
inline std::string rollout_csv(const Rollout& r, bool queries)
{
    std::ostringstream out;
    out.precision(17);
    out << "step,t,id,variable,value\n";
    const auto& frames = queries ? r.queries : r.sites;
    for (std::size_t k = 0; k < frames.size(); ++k)
        for (Eigen::Index i = 0; i < frames[k].rows(); ++i)
            for (Eigen::Index m = 0; m < frames[k].cols(); ++m)
                out << k + 1 << ',' << r.times[k] << ',' << i << ',' << m << ',' << frames[k](i, m) << '\n';
    return out.str();
}

/// Every sequence of a result, as rollout_csv with a leading sequence column.
inline std::string trajectory_csv(const ForecastResult& r, bool queries)
{
    std::ostringstream out;
    out.precision(17);
    out << "sequence,step,t,id,variable,value\n";
    for (const auto& s : r.sequences) {
        const auto& frames = queries ? s.rollout.queries : s.rollout.sites;
        for (std::size_t k = 0; k < frames.size(); ++k)
            for (Eigen::Index i = 0; i < frames[k].rows(); ++i)
                for (Eigen::Index m = 0; m < frames[k].cols(); ++m)
                    out << s.id << ',' << k + 1 << ',' << s.rollout.times[k] << ',' << i << ',' << m << ','
                        << frames[k](i, m) << '\n';
    }
    return out.str();
}

inline nlohmann::json summary_json(const ForecastResult& r)
{
    auto trace = [](const std::vector<double>& v) {
        auto a = nlohmann::json::array();
        for (double x : v) a.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
        return a;
    };
    nlohmann::json j;
    j["setting"] = r.setting;
    j["model"] = r.model_id;
    j["dataset"] = r.dataset_id;
    j["steps"] = r.snr_x.size();
    j["has_grid_truth"] = r.has_grid;
    j["mean_snr_x"] = trace(r.snr_x);
    j["mean_snr_omega"] = r.has_grid ? trace(r.snr_omega) : nlohmann::json(nullptr);
    j["mean_baseline_snr_x"] = trace(r.baseline_snr_x);
    auto seqs = nlohmann::json::array();
    for (const auto& s : r.sequences)
        seqs.push_back({{"id", s.id},
                        {"snr_x", trace(s.snr_x)},
                        {"snr_omega", r.has_grid ? trace(s.snr_omega) : nlohmann::json(nullptr)},
                        {"baseline_snr_x", trace(s.baseline_snr_x)}});
    j["sequences"] = std::move(seqs);
    return j;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

} // namespace detail

/// Loads the model and dataset, checks them against the setting before any
/// compute, forecasts, and writes whichever outputs are configured.
inline ForecastResult run_experiment(const ExperimentConfig& cfg)
{
    for (const auto* p : {&cfg.dataset_path, &cfg.model_path})
        if (!std::filesystem::exists(*p)) throw ValidationError("file '" + *p + "' does not exist");
    const OperatorModel model = load_checkpoint(cfg.model_path);
    const Dataset ds = read_dataset(cfg.dataset_path);
    ForecastResult r = evaluate_forecasts(model, ds, cfg.setting, cfg.horizon, cfg.start, cfg.sequences);
    r.model_id = std::filesystem::path(cfg.model_path).filename().string();
    r.dataset_id = std::filesystem::path(cfg.dataset_path).filename().string();
    if (!cfg.metrics_csv.empty()) detail::write_text(cfg.metrics_csv, metrics_csv(r));
    if (!cfg.summary_json.empty()) detail::write_text(cfg.summary_json, summary_json(r).dump(2) + "\n");
    if (!cfg.trajectory_prefix.empty()) {
        detail::write_text(cfg.trajectory_prefix + "_sites.csv", trajectory_csv(r, false));
        if (r.has_grid) detail::write_text(cfg.trajectory_prefix + "_queries.csv", trajectory_csv(r, true));
    }
    return r;
}

} // namespace drbf
