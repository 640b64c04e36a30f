#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "drbf/checkpoint.hpp"
#include "drbf/datagen.hpp"
#include "drbf/forecast.hpp"
#include "drbf/loss.hpp"
#include "drbf/training.hpp"

using namespace drbf;

namespace {

PointMatrix random_sites(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return sample_interior(Domain::square(1.0), n, rng);
}

OperatorModel small_model(int variables, int features, int order, bool linear, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    OperatorModel m = OperatorModel::create(2, variables, features, order, linear, 0.5, rng, {6, 5}, {7, 5});
    std::normal_distribution<double> b(0.0, 0.2);
    for (auto& l : m.lnet.layers())
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = b(rng);
    if (m.fnet)
        for (auto& l : m.fnet->layers())
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = b(rng);
    return m;
}

Frames random_frames(int count, int n, int variables, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Frames f;
    for (int k = 0; k < count; ++k) {
        Matrix m(n, variables);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
        f.push_back(m);
    }
    return f;
}

GenerateConfig tiny_heat()
{
    GenerateConfig cfg;
    cfg.pde.kind = PdeKind::heat;
    cfg.n_interior = 10;
    cfg.n_boundary = 6;
    cfg.sequences = 5;
    cfg.steps = 5;
    cfg.resolution = 41;
    cfg.grid_resolution = 0;
    return cfg;
}

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("drbf_test_training_" + name);
}

} // namespace

TEST(SequenceLoss, HandCase)
{
    // one site, D = Phi = 1, lambda = 0: prediction is u (1 + dt)
    OperatorModel m;
    DenseLayer layer{Matrix::Zero(1, 5), Vector::Zero(1)};
    layer.weights(0, 4) = 1.0;
    m.lnet = Mlp::from_layers({layer});
    PointMatrix site(1, 2);
    site << 0.2, 0.1;
    const Frames frames{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0)};
    EXPECT_NEAR(sequence_loss(m, site, frames, 0.2, 0.0), 0.16, 1e-15);
}

TEST(SequenceLoss, ZeroForSelfGeneratedFrames)
{
    const PointMatrix p = random_sites(6, 1);
    const OperatorModel m = small_model(2, 3, 2, false, 2);
    SiteSet s;
    s.points = p;
    const Frames seed = random_frames(2, 6, 2, 3);
    const Rollout r = forecast(m, s, seed, BoundarySpec::zero(), 4, 0.05);
    Frames frames = seed;
    frames.insert(frames.end(), r.sites.begin(), r.sites.end());
    EXPECT_LT(sequence_loss(m, p, frames, 0.05, m.lambda), 1e-26);
}

TEST(SequenceLoss, DoublingResidualsQuadruplesLoss)
{
    const PointMatrix p = random_sites(6, 4);
    const OperatorModel m = small_model(1, 2, 1, false, 5);
    SiteSet s;
    s.points = p;
    const Frames seed = random_frames(1, 6, 1, 6);
    const Matrix prediction = forecast(m, s, seed, BoundarySpec::zero(), 1, 0.05).sites[0];
    const Matrix pert = random_frames(1, 6, 1, 7)[0];
    const double once = sequence_loss(m, p, {seed[0], Matrix(prediction + pert)}, 0.05, m.lambda);
    const double twice = sequence_loss(m, p, {seed[0], Matrix(prediction + 2.0 * pert)}, 0.05, m.lambda);
    EXPECT_NEAR(once, pert.squaredNorm(), 1e-12 * once);
    EXPECT_NEAR(twice, 4.0 * once, 1e-12 * twice);
}

TEST(SequenceLoss, InsufficientFramesRejected)
{
    const OperatorModel m = small_model(1, 2, 2, false, 1);
    const PointMatrix p = random_sites(4, 1);
    EXPECT_THROW(sequence_loss(m, p, random_frames(2, 4, 1, 1), 0.1, 1e-4), ValidationError);
    EXPECT_NO_THROW(sequence_loss(m, p, random_frames(3, 4, 1, 1), 0.1, 1e-4));
}

TEST(SequenceLoss, LeftOutSiteResidualCounts)
{
    const PointMatrix p = random_sites(6, 8);
    const OperatorModel m = small_model(1, 2, 1, false, 9);
    const Frames f = random_frames(3, 6, 1, 10);
    for (int l = 0; l < 6; ++l) {
        const double only = sequence_loss(m, p, f, 0.1, 1e-4, l, ResidualSites::left_out_only);
        EXPECT_TRUE(std::isfinite(only));
        EXPECT_GT(only, 0.0);
        EXPECT_GT(sequence_loss(m, p, f, 0.1, 1e-4, l, ResidualSites::all), only);
    }
}

TEST(SequenceLoss, GradientMatchesCentralDifferences)
{
    const PointMatrix p = random_sites(4, 11);
    const Frames f = random_frames(3, 4, 2, 12);
    for (const bool linear : {false, true}) {
        const int variables = linear ? 1 : 2;
        const int features = linear ? 1 : 2;
        const OperatorModel m = small_model(variables, features, 1, linear, 13);
        const Frames frames = linear ? random_frames(3, 4, 1, 12) : f;
        for (const std::optional<int> l : {std::optional<int>{}, std::optional<int>{2}}) {
            const LossAndGradient lg = sequence_loss_gradient(m, p, frames, 0.1, 1e-3, l);
            const std::vector<double> analytic = lg.gradient.pack();
            const std::vector<double> params = m.pack();
            ASSERT_EQ(analytic.size(), params.size());
            for (std::size_t k = 0; k < params.size(); ++k) {
                const double h = 1e-6 * std::max(1.0, std::abs(params[k]));
                OperatorModel plus = m, minus = m;
                std::vector<double> q = params;
                q[k] += h;
                plus.unpack(q);
                q[k] -= 2 * h;
                minus.unpack(q);
                const double fd = (sequence_loss(plus, p, frames, 0.1, 1e-3, l) -
                                   sequence_loss(minus, p, frames, 0.1, 1e-3, l)) /
                                  (2 * h);
                EXPECT_NEAR(analytic[k], fd, 1e-4 * std::max(std::abs(fd), 1e-3 * std::abs(lg.loss)))
                    << (linear ? "linear" : "nonlinear") << " param " << k << (k + 1 == params.size() ? " (sigma)" : "");
            }
        }
    }
}

TEST(LooSelect, CoverageDeterminismAndFrequency)
{
    std::mt19937_64 a(5), b(5);
    EXPECT_EQ(loo_select(9, a), loo_select(9, b));

    bool seen[2] = {false, false};
    for (std::uint64_t s = 0; s < 64; ++s) {
        std::mt19937_64 rng(s);
        seen[loo_select(2, rng)] = true;
    }
    EXPECT_TRUE(seen[0] && seen[1]);

    std::mt19937_64 rng(17);
    std::vector<int> count(5, 0);
    for (int i = 0; i < 10000; ++i) ++count[static_cast<std::size_t>(loo_select(5, rng))];
    const double sd = std::sqrt(10000 * 0.2 * 0.8);
    for (int c : count) EXPECT_LT(std::abs(c - 2000), 5 * sd);
    EXPECT_THROW(loo_select(1, rng), ValidationError);
}

TEST(Checkpoint, RoundTripIsExact)
{
    const OperatorModel m = small_model(2, 3, 2, false, 21);
    const auto path = temp_file("ckpt.json");
    save_checkpoint(m, path.string());
    const OperatorModel back = load_checkpoint(path.string());
    EXPECT_TRUE(back == m);
    EXPECT_EQ(back.pack(), m.pack());
    std::filesystem::remove(path);
}

TEST(Checkpoint, LinearVariantHasNullFNet)
{
    const OperatorModel m = small_model(1, 1, 1, true, 22);
    const nlohmann::json j = checkpoint_to_json(m);
    EXPECT_TRUE(j["F_net"].is_null());
    EXPECT_TRUE(checkpoint_from_json(j) == m);
}

TEST(Checkpoint, InconsistentWidthsAreValidationErrors)
{
    const OperatorModel m = small_model(1, 2, 1, false, 23);
    nlohmann::json j = checkpoint_to_json(m);
    j["L_net"]["weights"][1].erase(0);
    EXPECT_THROW(checkpoint_from_json(j), ValidationError);

    nlohmann::json k = checkpoint_to_json(m);
    k["h"] = 5;
    EXPECT_THROW(checkpoint_from_json(k), ValidationError);

    nlohmann::json v = checkpoint_to_json(m);
    v["version"] = 99;
    EXPECT_THROW(checkpoint_from_json(v), ValidationError);

    const auto path = temp_file("bad.json");
    std::ofstream(path) << "{ not json";
    EXPECT_THROW(load_checkpoint(path.string()), ValidationError);
    std::filesystem::remove(path);
}

TEST(Train, OneEpochIsDeterministic)
{
    const Dataset ds = generate_dataset(tiny_heat());
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.features = 3;
    cfg.lnet_hidden = {8};
    cfg.fnet_hidden = {8};
    cfg.seed = 4;
    const TrainResult a = train(ds, cfg), b = train(ds, cfg);
    EXPECT_EQ(checkpoint_to_json(a.model).dump(), checkpoint_to_json(b.model).dump());
    EXPECT_EQ(a.report.epochs[0].train_loss, b.report.epochs[0].train_loss);
}

TEST(Train, FrozenModelDataIsAlreadyFit)
{
    Dataset ds = generate_dataset(tiny_heat());
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.features = 3;
    cfg.lnet_hidden = {8};
    cfg.fnet_hidden = {8};
    cfg.loo_enabled = false;
    cfg.seed = 6;
    cfg.learning_rate = 0.0;
    const OperatorModel frozen = train(ds, cfg).model;

    // regenerate every sequence from the frozen model on the interior sites
    SiteSet interior;
    interior.points = ds.sites.interior();
    const int n = ds.sites.interior_count();
    for (auto& seq : ds.sequences) {
        const Rollout r = forecast(frozen, interior, {Matrix(seq.frames[0].topRows(n))}, BoundarySpec::zero(),
                                   ds.steps(), ds.dt, nullptr, cfg.lambda);
        for (int k = 1; k <= ds.steps(); ++k) seq.frames[static_cast<std::size_t>(k)].topRows(n) = r.sites[k - 1];
    }

    cfg.learning_rate = 1e-6;
    const TrainResult res = train(ds, cfg);
    EXPECT_LT(res.report.epochs[0].train_loss, 1e-24);
    const std::vector<double> before = frozen.pack(), after = res.model.pack();
    double norm2 = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) norm2 += (after[i] - before[i]) * (after[i] - before[i]);
    EXPECT_LT(std::sqrt(norm2), 1e-6);
}

TEST(Train, LossDecreasesOnSmallHeatProblem)
{
    const Dataset ds = generate_dataset(tiny_heat());
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 4;
    cfg.linear = true;
    cfg.lnet_hidden = {16, 8};
    const TrainResult r = train(ds, cfg);
    ASSERT_EQ(r.report.epochs.size(), 30u);
    EXPECT_LT(r.report.epochs.back().train_loss, 0.5 * r.report.epochs.front().train_loss);
    for (const auto& e : r.report.epochs) {
        EXPECT_TRUE(std::isfinite(e.train_loss) && e.train_loss >= 0.0);
        EXPECT_TRUE(std::isfinite(e.val_loss) && e.val_loss >= 0.0);
    }
    EXPECT_EQ(r.report.validation_sequences.size(), 1u);
    EXPECT_EQ(r.report.final_sigma, r.model.kernel.sigma);
}

TEST(Train, RejectsBadInput)
{
    Dataset ds = generate_dataset(tiny_heat());
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(ds, cfg), ValidationError);
    cfg.epochs = 1;
    Dataset empty = ds;
    empty.sequences.clear();
    EXPECT_THROW(train(empty, cfg), ValidationError);
}

TEST(Train, DivergenceAborts)
{
    const Dataset ds = generate_dataset(tiny_heat());
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 1;
    cfg.linear = true;
    cfg.learning_rate = 1e3;
    cfg.divergence_factor = 1.5;
    EXPECT_THROW(train(ds, cfg), NumericalError);
}

TEST(Train, ReportCsv)
{
    TrainReport r;
    r.epochs.push_back({1, 0.5, 0.25, 0.3});
    EXPECT_EQ(report_csv(r), "epoch,train_loss,val_loss,sigma\n1,0.5,0.25,0.29999999999999999\n");
}
