#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drbf/dataset.hpp"
#include "drbf/errors.hpp"
#include "drbf/geometry.hpp"
#include "drbf/reference_solver.hpp"

namespace drbf {

/// Sampling ranges for Gaussian-bump initial conditions.
struct BumpRanges {
    double amplitude_min = 1.0, amplitude_max = 2.0;
    double sharpness_min = 10.0, sharpness_max = 100.0;
    double center_margin = 0.0; // minimum distance of the centre from the boundary
};

/// Standard deviation of the Fourier coefficients of Burgers-Fisher initial conditions.
inline constexpr double fourier_coefficient_sd = 0.2;

/// Wave and heat: a ~ U, eps ~ U, z ~ U(domain). Burgers-Fisher: every cos
/// and sin coefficient ~ N(0, 0.2) for each variable.
inline InitialCondition sample_ic(const PdeSpec& spec, const Domain& domain, std::mt19937_64& rng,
                                  const BumpRanges& ranges = {})
{
    if (spec.kind == PdeKind::burgers_fisher) {
        std::normal_distribution<double> coef(0.0, fourier_coefficient_sd);
        FourierTable t;
        t.cos_coef.resize(static_cast<std::size_t>(spec.variables()));
        t.sin_coef.resize(static_cast<std::size_t>(spec.variables()));
        for (int m = 0; m < spec.variables(); ++m) {
            for (auto& c : t.cos_coef[static_cast<std::size_t>(m)]) c = coef(rng);
            for (auto& c : t.sin_coef[static_cast<std::size_t>(m)]) c = coef(rng);
        }
        return t;
    }
    std::uniform_real_distribution<double> amp(ranges.amplitude_min, ranges.amplitude_max);
    std::uniform_real_distribution<double> sharp(ranges.sharpness_min, ranges.sharpness_max);
    GaussianBump b;
    b.amplitude = amp(rng);
    b.sharpness = sharp(rng);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        b.center = sample_interior(domain, 1, rng).row(0).transpose();
        if (ranges.center_margin <= 0.0 || domain.boundary_distance(b.center) >= ranges.center_margin) return b;
    }
    throw ValidationError("sample_ic: no interior point is " + std::to_string(ranges.center_margin) +
                          " away from the boundary");
}

/// Bilinear samples of the reference solution at the sites, every
/// `coarse_dt`. Boundary sites take the Dirichlet data exactly.
inline MeasurementSequence sample_at_sites(const FineTrajectory& traj, const SiteSet& sites, double coarse_dt,
                                           const PointMatrix* grid_points = nullptr)
{
    const double ratio = coarse_dt / traj.record_interval;
    const auto factor = static_cast<std::size_t>(std::lround(ratio));
    if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9 * ratio)
        throw ValidationError("sample_at_sites: coarse step must be a multiple of the recorded step");
    MeasurementSequence seq;
    for (std::size_t f = 0; f < traj.frames.size(); f += factor) {
        Matrix values = interpolate_frame(traj, f, sites.points);
        for (int i = sites.interior_count(); i < sites.size(); ++i)
            values.row(i).setConstant(traj.boundary.value(traj.times[f], sites.point(i)));
        seq.frames.push_back(std::move(values));
        if (grid_points) seq.grid_truth.push_back(interpolate_frame(traj, f, *grid_points));
    }
    return seq;
}

/// Per-variable standard deviation over every site value of every frame.
inline Vector value_sd(const std::vector<MeasurementSequence>& seqs)
{
    const auto m = seqs.at(0).frames.at(0).cols();
    Vector sum = Vector::Zero(m), sq = Vector::Zero(m);
    double count = 0.0;
    for (const auto& s : seqs)
        for (const auto& f : s.frames) {
            sum += f.colwise().sum().transpose();
            sq += f.array().square().matrix().colwise().sum().transpose();
            count += static_cast<double>(f.rows());
        }
    const Vector mean = sum / count;
    return (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
}

/// Adds i.i.d. N(0, (level * sd_m)^2) noise to variable m of every frame.
inline MeasurementSequence add_noise(MeasurementSequence seq, double level, const Vector& sd, std::mt19937_64& rng)
{
    detail::require(level >= 0.0, "add_noise: noise level must be non-negative");
    if (level == 0.0) return seq;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& f : seq.frames)
        for (Eigen::Index i = 0; i < f.rows(); ++i)
            for (Eigen::Index m = 0; m < f.cols(); ++m) f(i, m) += level * sd[m] * gauss(rng);
    return seq;
}

struct GenerateConfig {
    PdeSpec pde;
    Domain domain = Domain::square(1.0);
    BoundarySpec boundary = BoundarySpec::zero();
    int n_interior = 48;
    int n_boundary = 16;
    std::uint64_t site_seed = 1;
    int sequences = 30;
    int steps = 50; // K
    double dt = 0.01;
    int resolution = 101;
    double noise = 0.0;
    int grid_resolution = 21; // 0 disables grid truth
    std::uint64_t seed = 0;
    std::optional<BumpRanges> bump;
    std::string setting; // free label carried into the metadata

    BumpRanges bump_ranges() const
    {
        if (bump) return *bump;
        BumpRanges r;
        if (pde.kind == PdeKind::heat) {
            r.sharpness_min = 5.0;
            r.sharpness_max = 20.0;
            r.center_margin = 0.5 * domain.inradius();
        }
        return r;
    }
};

/// Independent RNG stream for (master seed, sequence id, purpose).
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t id, std::uint64_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

inline Dataset generate_dataset(const GenerateConfig& cfg, const SiteSet* fixed_sites = nullptr)
{
    cfg.pde.validate();
    detail::require(cfg.sequences >= 1, "generate: need at least one sequence");
    detail::require(cfg.steps >= 1, "generate: need at least one step");
    detail::require(cfg.dt > 0.0, "generate: dt must be positive");

    Dataset ds;
    ds.domain = cfg.domain;
    ds.sites = fixed_sites ? *fixed_sites : select_sites(cfg.domain, cfg.n_interior, cfg.n_boundary, cfg.site_seed);
    if (auto err = check_site_set(cfg.domain, ds.sites)) throw ValidationError("generate: " + *err);
    ds.boundary = cfg.boundary;
    ds.dt = cfg.dt;
    ds.variables = cfg.pde.variables();
    ds.order = cfg.pde.order();
    std::optional<EvalGrid> grid;
    if (cfg.grid_resolution > 0) {
        grid = eval_grid(cfg.domain, cfg.grid_resolution);
        ds.grid_points = grid->points;
    }

    SolverOptions opt;
    opt.resolution = cfg.resolution;
    opt.horizon = cfg.steps * cfg.dt;
    opt.record_interval = cfg.dt;
    const BumpRanges ranges = cfg.bump_ranges();
    for (int s = 0; s < cfg.sequences; ++s) {
        auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(s), 0);
        const InitialCondition ic = sample_ic(cfg.pde, cfg.domain, rng, ranges);
        const FineTrajectory traj = solve_reference(cfg.pde, cfg.domain, ic, cfg.boundary, opt);
        MeasurementSequence seq = sample_at_sites(traj, ds.sites, cfg.dt, grid ? &grid->points : nullptr);
        seq.id = std::to_string(s);
        ds.sequences.push_back(std::move(seq));
    }
    if (cfg.noise > 0.0) {
        const Vector sd = value_sd(ds.sequences);
        for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
            auto rng = stream_rng(cfg.seed, s, 1);
            ds.sequences[s] = add_noise(std::move(ds.sequences[s]), cfg.noise, sd, rng);
            auto& frames = ds.sequences[s].frames;
            for (std::size_t k = 0; k < frames.size(); ++k)
                for (int i = ds.sites.interior_count(); i < ds.sites.size(); ++i)
                    frames[k].row(i).setConstant(
                        cfg.boundary.value(static_cast<double>(k) * cfg.dt, ds.sites.point(i)));
        }
    }

    ds.meta = {{"pde", to_string(cfg.pde.kind)},
               {"wave_speed", cfg.pde.wave_speed},
               {"viscosity", cfg.pde.viscosity},
               {"reaction", cfg.pde.reaction},
               {"diffusivity", cfg.pde.diffusivity},
               {"resolution", cfg.resolution},
               {"noise", cfg.noise},
               {"seed", cfg.seed},
               {"site_seed", cfg.site_seed},
               {"setting", cfg.setting}};
    return ds;
}

} // namespace drbf
