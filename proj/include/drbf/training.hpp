#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drbf/adam.hpp"
#include "drbf/dataset.hpp"
#include "drbf/errors.hpp"
#include "drbf/loss.hpp"
#include "drbf/operator_model.hpp"

namespace drbf {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double lambda = default_ridge;
    int features = 16;       // h
    bool linear = false;     // linear variant: h = 1, no F_net
    bool loo_enabled = true;
    ResidualSites residual_sites = ResidualSites::all;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    std::optional<double> sigma0;
    std::vector<int> lnet_hidden{64, 32};
    std::vector<int> fnet_hidden{128, 64, 32};
    double divergence_factor = 1e6;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double sigma = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double final_sigma = 0.0;
    double seconds = 0.0;
    std::vector<std::size_t> validation_sequences;
};

/// Uniform draw from {0, ..., n_sites - 1}.
inline int loo_select(int n_sites, std::mt19937_64& rng)
{
    detail::require(n_sites >= 2, "loo_select: need at least two sites");
    return std::uniform_int_distribution<int>(0, n_sites - 1)(rng);
}

/// Interior-site frames of every sequence.
inline std::vector<Frames> interior_frames(const Dataset& ds)
{
    std::vector<Frames> out;
    const auto n = ds.sites.interior_count();
    for (const auto& s : ds.sequences) {
        Frames f;
        for (const auto& frame : s.frames) f.push_back(frame.topRows(n));
        out.push_back(std::move(f));
    }
    return out;
}

/// Mean squared one-step residual (no site left out) over every transition.
inline double mean_transition_loss(const OperatorModel& model, const PointMatrix& sites,
                                   const std::vector<const Frames*>& seqs, double dt, double lambda)
{
    TransitionLoss acc(model, sites, dt, lambda, ResidualSites::all, false);
    std::size_t count = 0;
    for (const Frames* f : seqs)
        for (int k = model.order - 1; k + 1 < static_cast<int>(f->size()); ++k) {
            acc.add({f, k, std::nullopt}, 1.0);
            ++count;
        }
    return count ? acc.loss() / static_cast<double>(count) : 0.0;
}

struct TrainResult {
    OperatorModel model;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam over (sequence, step, left-out site) samples drawn from
/// the interior sites. Returns the parameters of the best validation epoch.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {})
{
    const auto t_start = std::chrono::steady_clock::now();
    detail::require(!ds.sequences.empty(), "train: empty dataset");
    detail::require(cfg.epochs >= 1, "train: epochs must be at least 1");
    detail::require(cfg.batch_size >= 1, "train: batch size must be at least 1");
    detail::require(ds.steps() >= ds.order + 1, "train: sequences need at least p+1 steps");
    detail::require(ds.sites.interior_count() >= 2, "train: need at least two interior sites");
    const int h = cfg.linear ? 1 : cfg.features;
    detail::require(!cfg.linear || ds.variables == 1, "train: the linear variant supports one variable only");

    std::mt19937_64 rng(cfg.seed);
    const PointMatrix sites = ds.sites.interior();
    const std::vector<Frames> frames = interior_frames(ds);

    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = 0;
    if (frames.size() >= 2)
        n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(cfg.validation_fraction * frames.size())),
                                        cfg.validation_fraction > 0.0 ? 1 : 0, frames.size() - 1);
    std::vector<const Frames*> train_seqs, val_seqs;
    TrainReport report;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_val) {
            val_seqs.push_back(&frames[order[i]]);
            report.validation_sequences.push_back(order[i]);
        } else {
            train_seqs.push_back(&frames[order[i]]);
        }
    }
    std::sort(report.validation_sequences.begin(), report.validation_sequences.end());

    const double sigma0 = cfg.sigma0.value_or(initial_sigma(sites));
    OperatorModel model = OperatorModel::create(ds.domain.dim(), ds.variables, h, ds.order, cfg.linear, sigma0, rng,
                                                cfg.lnet_hidden, cfg.fnet_hidden, cfg.lambda);
    AdamState adam(model.parameter_count(), AdamConfig{cfg.learning_rate});

    struct Sample {
        std::size_t seq;
        int step;
    };
    std::vector<Sample> samples;
    for (std::size_t s = 0; s < train_seqs.size(); ++s)
        for (int k = ds.order - 1; k + 1 < static_cast<int>(train_seqs[s]->size()); ++k) samples.push_back({s, k});

    const int n_sites = static_cast<int>(sites.rows());
    OperatorModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::optional<double> reference_loss;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(samples.begin(), samples.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b0 = 0, batch = 0; b0 < samples.size(); b0 += static_cast<std::size_t>(cfg.batch_size), ++batch) {
            const std::size_t b1 = std::min(samples.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
            const double weight = 1.0 / static_cast<double>(b1 - b0);
            const auto where = [&] {
                return " at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch + 1);
            };
            try {
                TransitionLoss acc(model, sites, ds.dt, cfg.lambda, cfg.residual_sites, true);
                for (std::size_t s = b0; s < b1; ++s) {
                    std::optional<int> l;
                    if (cfg.loo_enabled) l = loo_select(n_sites, rng);
                    epoch_loss += acc.add({train_seqs[samples[s].seq], samples[s].step, l}, weight);
                }
                const double batch_loss = acc.loss();
                if (!std::isfinite(batch_loss) ||
                    (reference_loss && batch_loss > cfg.divergence_factor * std::max(*reference_loss, 1e-300))) {
                    std::ostringstream msg;
                    msg << "train: loss diverged (" << batch_loss << ")" << where();
                    throw NumericalError(msg.str());
                }
                if (!reference_loss) reference_loss = batch_loss;
                adam_step(adam, model, acc.gradient());
            } catch (const NumericalError&) {
                throw;
            } catch (const std::exception& e) {
                // shapes were checked up front, so any failure here comes from diverged parameters
                throw NumericalError(std::string("train: ") + e.what() + where());
            }
        }
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = samples.empty() ? 0.0 : epoch_loss / static_cast<double>(samples.size());
        rec.val_loss = val_seqs.empty() ? mean_transition_loss(model, sites, train_seqs, ds.dt, cfg.lambda)
                                        : mean_transition_loss(model, sites, val_seqs, ds.dt, cfg.lambda);
        rec.sigma = model.kernel.sigma;
        if (!std::isfinite(rec.val_loss))
            throw NumericalError("train: non-finite validation loss at epoch " + std::to_string(epoch + 1));
        report.epochs.push_back(rec);
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            best = model;
            report.best_epoch = rec.epoch;
        }
        if (on_epoch) on_epoch(rec);
    }
    report.final_sigma = best.kernel.sigma;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(best), std::move(report)};
}

/// CSV with columns epoch,train_loss,val_loss,sigma.
inline std::string report_csv(const TrainReport& r)
{
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,val_loss,sigma\n";
    for (const auto& e : r.epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.sigma << '\n';
    return out.str();
}

} // namespace drbf
