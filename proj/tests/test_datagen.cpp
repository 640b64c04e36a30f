#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "drbf/datagen.hpp"

using namespace drbf;

namespace {

PdeSpec pde(PdeKind kind)
{
    PdeSpec s;
    s.kind = kind;
    return s;
}

double standing_wave_error(int resolution, double v, double horizon)
{
    const double pi = std::numbers::pi;
    const FieldFunction ic{[&](const Point& x, int) { return std::sin(pi * (x[0] + 1) / 2) * std::sin(pi * (x[1] + 1) / 2); }};
    PdeSpec spec = pde(PdeKind::wave);
    spec.wave_speed = v;
    SolverOptions opt;
    opt.resolution = resolution;
    opt.horizon = horizon;
    opt.record_interval = horizon;
    const FineTrajectory tr = solve_reference(spec, Domain::square(1.0), ic, BoundarySpec::zero(), opt);
    const Lattice& lat = *tr.lattice;
    const double factor = std::cos(std::sqrt(2.0) * pi * v * tr.times.back() / 2);
    double err = 0.0;
    for (int k = 0; k < lat.size(); ++k)
        err = std::max(err, std::abs(tr.frames.back()(k, 0) - factor * ic.f(lat.point(k), 0)));
    return err;
}

/// Trajectory over a hand-made lattice; frame f holds `fill(f, x)` at every node.
FineTrajectory synthetic_trajectory(int resolution, int frames, double interval,
                                    const std::function<double(int, const Point&)>& fill)
{
    FineTrajectory tr;
    tr.lattice = std::make_shared<Lattice>(Domain::square(1.0), resolution);
    tr.record_interval = interval;
    for (int f = 0; f < frames; ++f) {
        Matrix u(tr.lattice->size(), 1);
        for (int k = 0; k < tr.lattice->size(); ++k) u(k, 0) = fill(f, tr.lattice->point(k));
        tr.frames.push_back(u);
        tr.times.push_back(f * interval);
    }
    return tr;
}

GenerateConfig small_config(PdeKind kind)
{
    GenerateConfig cfg;
    cfg.pde = pde(kind);
    cfg.n_interior = 8;
    cfg.n_boundary = 8;
    cfg.sequences = 3;
    cfg.steps = 4;
    cfg.resolution = 41;
    cfg.grid_resolution = 5;
    return cfg;
}

} // namespace

TEST(ReferenceSolver, ZeroStaysZero)
{
    const FieldFunction zero{[](const Point&, int) { return 0.0; }};
    SolverOptions opt;
    opt.resolution = 41;
    opt.horizon = 0.2;
    for (PdeKind kind : {PdeKind::wave, PdeKind::heat, PdeKind::burgers_fisher}) {
        const FineTrajectory tr = solve_reference(pde(kind), Domain::disk(1.0), zero, BoundarySpec::zero(), opt);
        for (const auto& f : tr.frames) EXPECT_TRUE(f.isZero(0.0)) << to_string(kind);
    }
}

TEST(ReferenceSolver, BurgersFisherConstantOneIsStationary)
{
    const FieldFunction one{[](const Point&, int) { return 1.0; }};
    SolverOptions opt;
    opt.resolution = 41;
    opt.horizon = 0.3;
    const FineTrajectory tr =
        solve_reference(pde(PdeKind::burgers_fisher), Domain::square(1.0), one, BoundarySpec::constant(1.0), opt);
    for (const auto& f : tr.frames) EXPECT_LT((f.array() - 1.0).abs().maxCoeff(), 1e-14);
}

TEST(ReferenceSolver, StandingWaveMatchesAnalyticSolution)
{
    EXPECT_LT(standing_wave_error(201, 0.1, 2.0), 1e-3);
}

TEST(ReferenceSolver, StandingWaveConverges)
{
    const double coarse = standing_wave_error(51, 0.1, 2.0);
    const double fine = standing_wave_error(101, 0.1, 2.0);
    EXPECT_GE(coarse / fine, 3.0) << coarse << " vs " << fine;
}

TEST(ReferenceSolver, RejectsUnstableStep)
{
    SolverOptions opt;
    opt.resolution = 101;
    opt.horizon = 0.1;
    opt.record_interval = 0.1;
    opt.dt_fine = 0.1;
    EXPECT_THROW(solve_reference(pde(PdeKind::heat), Domain::square(1.0), GaussianBump{}, BoundarySpec::zero(), opt),
                 ValidationError);
}

TEST(ReferenceSolver, WaveEnergyIsNearlyConserved)
{
    const PdeSpec spec = pde(PdeKind::wave);
    GaussianBump ic;
    ic.amplitude = 1.5;
    ic.sharpness = 30.0;
    ic.center = Point::Zero(2);
    ic.center << 0.2, -0.1;
    SolverOptions opt;
    opt.resolution = 101;
    opt.horizon = 2.0;
    opt.record_interval = 0.01;
    const FineTrajectory tr = solve_reference(spec, Domain::square(1.0), ic, BoundarySpec::zero(), opt);
    const Lattice& lat = *tr.lattice;
    const double h = lat.spacing(), v2 = spec.wave_speed * spec.wave_speed;
    const int res = lat.resolution();
    auto energy = [&](std::size_t f) {
        const Matrix ut = (tr.frames[f + 1] - tr.frames[f - 1]) / (tr.times[f + 1] - tr.times[f - 1]);
        const Matrix& u = tr.frames[f];
        double e = ut.squaredNorm();
        for (int j = 0; j < res; ++j)
            for (int i = 0; i + 1 < res; ++i) {
                e += v2 * std::pow((u(lat.index(i + 1, j), 0) - u(lat.index(i, j), 0)) / h, 2);
                e += v2 * std::pow((u(lat.index(j, i + 1), 0) - u(lat.index(j, i), 0)) / h, 2);
            }
        return e * h * h;
    };
    const double e0 = energy(1);
    double lo = e0, hi = e0;
    for (std::size_t f = 2; f + 1 < tr.frames.size(); ++f) {
        lo = std::min(lo, energy(f));
        hi = std::max(hi, energy(f));
    }
    EXPECT_LT((hi - lo) / e0, 0.02);
}

TEST(ReferenceSolver, BurgersFisherStaysInInvariantRegion)
{
    const FieldFunction ic{[](const Point& x, int m) {
        return 0.5 + 0.45 * std::sin(2.0 * x[0] + m) * std::cos(3.0 * x[1]) * (1 - x[0] * x[0]) * (1 - x[1] * x[1]);
    }};
    SolverOptions opt;
    opt.resolution = 101;
    opt.horizon = 0.5;
    const FineTrajectory tr = solve_reference(pde(PdeKind::burgers_fisher), Domain::square(1.0), ic,
                                              BoundarySpec::zero(), opt);
    for (const auto& f : tr.frames) {
        EXPECT_GE(f.minCoeff(), -0.01);
        EXPECT_LE(f.maxCoeff(), 1.01);
    }
}

TEST(SampleIc, BumpSupport)
{
    const Domain d = Domain::disk(1.0);
    for (std::uint64_t s = 0; s < 1000; ++s) {
        std::mt19937_64 rng(s);
        const auto ic = std::get<GaussianBump>(sample_ic(pde(PdeKind::wave), d, rng));
        ASSERT_GE(ic.amplitude, 1.0);
        ASSERT_LE(ic.amplitude, 2.0);
        ASSERT_GE(ic.sharpness, 10.0);
        ASSERT_LE(ic.sharpness, 100.0);
        ASSERT_TRUE(d.contains(ic.center));
    }
}

TEST(SampleIc, FourierTableShapeAndDeterminism)
{
    std::mt19937_64 a(3), b(3);
    const auto t = std::get<FourierTable>(sample_ic(pde(PdeKind::burgers_fisher), Domain::square(1.0), a));
    const auto u = std::get<FourierTable>(sample_ic(pde(PdeKind::burgers_fisher), Domain::square(1.0), b));
    EXPECT_EQ(FourierTable::pairs, 49);
    ASSERT_EQ(t.cos_coef.size(), 2u);
    ASSERT_EQ(t.sin_coef.size(), 2u);
    EXPECT_EQ(t.cos_coef[0].size(), 49u);
    EXPECT_EQ(t.cos_coef, u.cos_coef);
    EXPECT_EQ(t.sin_coef, u.sin_coef);
}

TEST(SampleIc, CentreMarginIsRespected)
{
    BumpRanges r;
    r.center_margin = 0.5;
    const Domain d = Domain::square(1.0);
    for (std::uint64_t s = 0; s < 200; ++s) {
        std::mt19937_64 rng(s);
        const auto ic = std::get<GaussianBump>(sample_ic(pde(PdeKind::heat), d, rng, r));
        EXPECT_GE(d.boundary_distance(ic.center), 0.5);
    }
    r.center_margin = 2.0;
    std::mt19937_64 rng(0);
    EXPECT_THROW(sample_ic(pde(PdeKind::heat), d, rng, r), ValidationError);
}

TEST(BoundaryValue, Presets)
{
    Point a(2), b(2);
    a << 1, 0;
    b << 0, 1;
    EXPECT_DOUBLE_EQ(boundary_value(BoundarySpec::angular(), 0.0, a), 0.0);
    EXPECT_DOUBLE_EQ(boundary_value(BoundarySpec::angular(), 3.0, b), 0.2);
    EXPECT_DOUBLE_EQ(boundary_value(BoundarySpec::zero(), 1.0, b), 0.0);
    EXPECT_DOUBLE_EQ(boundary_value(BoundarySpec::constant(0.7), 1.0, b), 0.7);
    EXPECT_EQ(BoundarySpec::from_string(BoundarySpec::constant(0.1).name()), BoundarySpec::constant(0.1));
    EXPECT_THROW(BoundarySpec::from_string("constant:x"), ValidationError);
    EXPECT_THROW(BoundarySpec::from_string("periodic"), ValidationError);
}

TEST(SampleAtSites, LatticeNodesAndCellMidpoints)
{
    const auto tr = synthetic_trajectory(11, 1, 0.01, [](int, const Point& x) {
        return 1.0 + 2.0 * x[0] - 3.0 * x[1] + 4.0 * x[0] * x[1];
    });
    const Lattice& lat = *tr.lattice;
    SiteSet sites;
    sites.points.resize(2, 2);
    sites.points.row(0) = lat.point(lat.index(3, 7)).transpose();
    const double h = lat.spacing();
    sites.points.row(1) << lat.point(lat.index(4, 2))[0] + h / 2, lat.point(lat.index(4, 2))[1] + h / 2;
    const MeasurementSequence seq = sample_at_sites(tr, sites, 0.01);
    EXPECT_NEAR(seq.frames[0](0, 0), tr.frames[0](lat.index(3, 7), 0), 1e-12);
    const double avg = (tr.frames[0](lat.index(4, 2), 0) + tr.frames[0](lat.index(5, 2), 0) +
                        tr.frames[0](lat.index(4, 3), 0) + tr.frames[0](lat.index(5, 3), 0)) /
                       4.0;
    EXPECT_NEAR(seq.frames[0](1, 0), avg, 1e-14);
}

TEST(SampleAtSites, TemporalSubsampling)
{
    const auto tr = synthetic_trajectory(5, 7, 0.01, [](int f, const Point&) { return static_cast<double>(f); });
    SiteSet sites;
    sites.points = Matrix::Zero(1, 2);
    const MeasurementSequence seq = sample_at_sites(tr, sites, 0.03);
    ASSERT_EQ(seq.frames.size(), 3u);
    EXPECT_EQ(seq.frames[0](0, 0), 0.0);
    EXPECT_EQ(seq.frames[1](0, 0), 3.0);
    EXPECT_EQ(seq.frames[2](0, 0), 6.0);
    EXPECT_THROW(sample_at_sites(tr, sites, 0.025), ValidationError);
}

TEST(SampleAtSites, OutsideLatticeRejected)
{
    const auto tr = synthetic_trajectory(5, 1, 0.01, [](int, const Point&) { return 0.0; });
    SiteSet sites;
    sites.points = Matrix::Constant(1, 2, 1.5);
    EXPECT_THROW(sample_at_sites(tr, sites, 0.01), ValidationError);
}

TEST(AddNoise, ZeroLevelIsIdentity)
{
    MeasurementSequence seq;
    seq.frames = {Matrix::Random(4, 2)};
    std::mt19937_64 rng(1);
    const Vector sd = Vector::Ones(2);
    const MeasurementSequence out = add_noise(seq, 0.0, sd, rng);
    EXPECT_EQ(out.frames[0], seq.frames[0]);
}

TEST(AddNoise, EmpiricalStandardDeviation)
{
    MeasurementSequence seq;
    seq.frames = {Matrix::Zero(1000000, 1)};
    Vector sd(1);
    sd << 2.5;
    std::mt19937_64 rng(2), rng2(2);
    const MeasurementSequence out = add_noise(seq, 0.01, sd, rng);
    const double emp = std::sqrt(out.frames[0].squaredNorm() / 1e6 - std::pow(out.frames[0].mean(), 2));
    EXPECT_NEAR(emp, 0.025, 0.01 * 0.025);
    EXPECT_EQ(add_noise(seq, 0.01, sd, rng2).frames[0], out.frames[0]);
    EXPECT_THROW(add_noise(seq, -1.0, sd, rng), ValidationError);
}

TEST(ValueSd, PerVariablePopulationSd)
{
    MeasurementSequence a, b;
    Matrix f(2, 2);
    f << 1, 10, 3, 10;
    a.frames = {f};
    Matrix g(2, 2);
    g << 1, 10, 3, 10;
    b.frames = {g};
    const Vector sd = value_sd({a, b});
    EXPECT_DOUBLE_EQ(sd[0], 1.0);
    EXPECT_DOUBLE_EQ(sd[1], 0.0);
}

TEST(GenerateDataset, ShapesBoundaryAndDeterminism)
{
    const GenerateConfig cfg = small_config(PdeKind::burgers_fisher);
    const Dataset ds = generate_dataset(cfg);
    EXPECT_EQ(ds.variables, 2);
    EXPECT_EQ(ds.order, 1);
    ASSERT_EQ(ds.sequences.size(), 3u);
    for (const auto& s : ds.sequences) {
        ASSERT_EQ(s.frames.size(), 5u);
        ASSERT_EQ(s.grid_truth.size(), 5u);
        for (const auto& f : s.frames) {
            EXPECT_EQ(f.rows(), 16);
            EXPECT_TRUE(f.bottomRows(8).isZero(0.0));
        }
    }
    EXPECT_TRUE(generate_dataset(cfg) == ds);
    EXPECT_EQ(ds.meta["pde"], "burgers_fisher");
}

TEST(GenerateDataset, NoisyBoundaryRowsStayExact)
{
    GenerateConfig cfg = small_config(PdeKind::wave);
    cfg.domain = Domain::disk(1.0);
    cfg.boundary = BoundarySpec::angular();
    cfg.noise = 0.01;
    const Dataset ds = generate_dataset(cfg);
    EXPECT_EQ(ds.order, 2);
    for (const auto& s : ds.sequences)
        for (const auto& f : s.frames)
            for (int i = ds.sites.interior_count(); i < ds.sites.size(); ++i)
                EXPECT_EQ(f(i, 0), boundary_value(ds.boundary, 0.0, ds.sites.point(i)));
}

TEST(Dataset, JsonRoundTripIsLossless)
{
    const Dataset ds = generate_dataset(small_config(PdeKind::heat));
    const auto path = std::filesystem::temp_directory_path() / "drbf_test_dataset.json";
    write_dataset(path.string(), ds);
    const Dataset back = read_dataset(path.string());
    EXPECT_TRUE(back == ds);
    std::filesystem::remove(path);
}

TEST(Dataset, SchemaErrorsNameTheField)
{
    const Dataset ds = generate_dataset(small_config(PdeKind::heat));
    nlohmann::json j = dataset_to_json(ds);
    j.erase("dt");
    try {
        dataset_from_json(j);
        FAIL() << "missing dt accepted";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("'dt'"), std::string::npos) << e.what();
    }
    nlohmann::json k = dataset_to_json(ds);
    k["sequences"][0]["frames"][1][3].push_back(0.0);
    try {
        dataset_from_json(k);
        FAIL() << "wrong frame width accepted";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("sequences[0].frames[1][3]"), std::string::npos) << e.what();
    }
}
