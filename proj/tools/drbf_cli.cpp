// Command-line front end: generate, train, forecast, evaluate, stability, selftest.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drbf/drbf.hpp"

namespace {

using nlohmann::json;

constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

json load_config(const std::string& path)
{
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw drbf::ValidationError("cannot open config '" + path + "'");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw drbf::ValidationError("config '" + path + "' must hold a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw drbf::ValidationError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

template <class T>
void override_key(json& j, const char* key, const std::optional<T>& value)
{
    if (value) j[key] = *value;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw drbf::ValidationError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw drbf::ValidationError("failed writing '" + path + "'");
}

void warn_conditioning(const drbf::RbfKernel& kernel, const drbf::PointMatrix& sites)
{
    const double cond = drbf::phi_condition(drbf::assemble_phi(kernel, sites, sites));
    if (cond > drbf::phi_condition_limit)
        std::cerr << "warning: interpolation matrix condition number " << cond << " exceeds "
                  << drbf::phi_condition_limit << " at sigma " << kernel.sigma << "; results rely on the ridge term\n";
}

drbf::Domain default_domain(const std::string& kind)
{
    switch (drbf::domain_kind_from_string(kind)) {
    case drbf::DomainKind::square: return drbf::Domain::square(1.0);
    case drbf::DomainKind::disk: return drbf::Domain::disk(1.0);
    case drbf::DomainKind::annulus: return drbf::Domain::annulus(0.5, 1.0);
    }
    throw drbf::ValidationError("unknown domain '" + kind + "'");
}

struct GenerateArgs {
    std::string config, out;
    std::optional<std::string> pde, domain, boundary, setting;
    std::optional<int> sequences, steps, resolution, n_interior, n_boundary, grid_resolution;
    std::optional<double> dt, noise;
    std::optional<std::uint64_t> seed, site_seed;
};

int run_generate(const GenerateArgs& a)
{
    json j = load_config(a.config);
    override_key(j, "pde", a.pde);
    override_key(j, "setting", a.setting);
    override_key(j, "boundary", a.boundary);
    override_key(j, "sequences", a.sequences);
    override_key(j, "steps", a.steps);
    override_key(j, "resolution", a.resolution);
    override_key(j, "n_interior", a.n_interior);
    override_key(j, "n_boundary", a.n_boundary);
    override_key(j, "grid_resolution", a.grid_resolution);
    override_key(j, "dt", a.dt);
    override_key(j, "noise", a.noise);
    override_key(j, "seed", a.seed);
    override_key(j, "site_seed", a.site_seed);
    if (a.domain) j["domain"] = drbf::domain_to_json(default_domain(*a.domain));
    const drbf::GenerateConfig cfg = drbf::generate_config_from_json(j);
    const drbf::Dataset ds = drbf::generate_dataset(cfg);
    drbf::write_dataset(a.out, ds);
    std::cerr << "wrote " << ds.sequences.size() << " sequences of " << ds.steps() << " steps on " << ds.sites.size()
              << " sites to " << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string config, dataset, out, report;
    std::optional<int> epochs, batch_size, features;
    std::optional<double> learning_rate, lambda, sigma0;
    std::optional<bool> linear, loo;
    std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a)
{
    json j = load_config(a.config);
    override_key(j, "epochs", a.epochs);
    override_key(j, "batch_size", a.batch_size);
    override_key(j, "features", a.features);
    override_key(j, "learning_rate", a.learning_rate);
    override_key(j, "lambda", a.lambda);
    override_key(j, "sigma0", a.sigma0);
    override_key(j, "linear", a.linear);
    override_key(j, "loo", a.loo);
    override_key(j, "seed", a.seed);
    const drbf::TrainConfig cfg = drbf::train_config_from_json(j);
    const drbf::Dataset ds = drbf::read_dataset(a.dataset);
    const auto result = drbf::train(ds, cfg, [](const drbf::EpochRecord& e) {
        std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << " sigma " << e.sigma
                  << '\n';
    });
    warn_conditioning(result.model.kernel, ds.sites.points.topRows(ds.sites.interior_count()));
    drbf::save_checkpoint(result.model, a.out);
    if (!a.report.empty()) write_text(a.report, drbf::report_csv(result.report));
    std::cerr << "best epoch " << result.report.best_epoch << ", sigma " << result.report.final_sigma << ", "
              << result.report.seconds << " s\n";
    return 0;
}

struct ForecastArgs {
    std::string model, dataset, out;
    std::size_t sequence = 0;
    int start = 0;
    int steps = 10;
    std::optional<std::uint64_t> seed;
};

int run_forecast(const ForecastArgs& a)
{
    const drbf::OperatorModel model = drbf::load_checkpoint(a.model);
    const drbf::Dataset ds = drbf::read_dataset(a.dataset);
    if (a.sequence >= ds.sequences.size())
        throw drbf::ValidationError("sequence " + std::to_string(a.sequence) + " out of range");
    if (model.order != ds.order || model.variables != ds.variables || model.dim != ds.domain.dim())
        throw drbf::ValidationError("model and dataset disagree on p, M or d");
    const auto& frames = ds.sequences[a.sequence].frames;
    if (a.start < 0 || a.start + model.order > static_cast<int>(frames.size()))
        throw drbf::ValidationError("start leaves fewer than p seed frames");
    warn_conditioning(model.kernel, ds.sites.points);
    const std::vector<drbf::Matrix> initial(frames.begin() + a.start, frames.begin() + a.start + model.order);
    const drbf::PointMatrix* queries = ds.grid_points ? &*ds.grid_points : nullptr;
    const double t0 = (a.start + model.order - 1) * ds.dt;
    const drbf::Rollout r =
        drbf::forecast(model, ds.sites, initial, ds.boundary, a.steps, ds.dt, queries, std::nullopt, t0);
    write_text(a.out + "_sites.csv", drbf::rollout_csv(r, false));
    if (queries) write_text(a.out + "_queries.csv", drbf::rollout_csv(r, true));
    return 0;
}

struct EvaluateArgs {
    std::string config;
    std::optional<std::string> model, dataset, setting, metrics, summary, trajectories;
    std::optional<int> horizon, start;
    std::optional<std::uint64_t> seed;
};

int run_evaluate(const EvaluateArgs& a)
{
    json j = load_config(a.config);
    override_key(j, "model", a.model);
    override_key(j, "dataset", a.dataset);
    override_key(j, "setting", a.setting);
    override_key(j, "metrics", a.metrics);
    override_key(j, "summary", a.summary);
    override_key(j, "trajectories", a.trajectories);
    override_key(j, "horizon", a.horizon);
    override_key(j, "start", a.start);
    override_key(j, "seed", a.seed);
    const drbf::ExperimentConfig cfg = drbf::experiment_config_from_json(j);
    warn_conditioning(drbf::load_checkpoint(cfg.model_path).kernel, drbf::read_dataset(cfg.dataset_path).sites.points);
    const drbf::ForecastResult r = drbf::run_experiment(cfg);
    std::cout << drbf::metrics_csv(r);
    return 0;
}

struct StabilityArgs {
    std::string model, dataset;
    std::optional<double> dt, lambda;
    std::optional<std::uint64_t> seed;
};

int run_stability(const StabilityArgs& a)
{
    const drbf::OperatorModel model = drbf::load_checkpoint(a.model);
    const drbf::Dataset ds = drbf::read_dataset(a.dataset);
    const double dt = a.dt.value_or(ds.dt);
    if (!(dt > 0.0)) throw drbf::ValidationError("dt must be positive");
    warn_conditioning(model.kernel, ds.sites.points);
    const auto rep = drbf::stability_report(model, ds.sites, dt, a.lambda);
    std::cout << json{{"spectral_radius", rep.spectral_radius},
                      {"status", drbf::to_string(rep.status)},
                      {"stable", rep.stable()}}
                     .dump(2)
              << '\n';
    return 0;
}

// Quick internal consistency checks; each prints one PASS/FAIL line.
int run_selftest(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    bool all = true;
    auto report = [&](const std::string& name, bool ok, double value) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << value << ")\n";
        all = all && ok;
    };

    {
        const drbf::SiteSet sites = drbf::select_sites(drbf::Domain::square(1.0), 24, 8, seed);
        const drbf::RbfKernel kernel(drbf::initial_sigma(sites.points));
        drbf::Matrix u = drbf::Matrix::Random(sites.size(), 2);
        const drbf::Matrix phi = drbf::assemble_phi(kernel, sites.points, sites.points);
        const drbf::Matrix back = phi * drbf::solve_coefficients(phi, u, 0.0);
        const double err = (back - u).norm() / u.norm();
        report("interpolation round trip", err <= 1e-8, err);
    }
    {
        const drbf::SiteSet sites = drbf::select_sites(drbf::Domain::disk(1.0), 6, 3, seed);
        const drbf::RbfKernel kernel(0.6);
        const drbf::AnalyticLaplacian lap{0.1};
        const drbf::Matrix h = drbf::build_h_matrix(lap, kernel, sites.points, sites.boundary_count, 0.01, 0.0);
        const drbf::Matrix phi = drbf::assemble_phi(kernel, sites.points, sites.points);
        drbf::Matrix a = phi + 0.01 * lap.derivative_matrix(kernel, sites.points, sites.points);
        a.bottomRows(sites.boundary_count).setZero();
        const drbf::Matrix classical = a * phi.inverse();
        const double err = (h - classical).cwiseAbs().maxCoeff();
        report("transition matrix against classical assembly", err <= 1e-9, err);
    }
    {
        const drbf::OperatorModel model = drbf::OperatorModel::create(2, 1, 2, 1, false, 0.7, rng, {4}, {4});
        drbf::PointMatrix sites = drbf::sample_interior(drbf::Domain::square(1.0), 4, rng);
        drbf::Frames frames;
        for (int k = 0; k < 3; ++k) frames.push_back(drbf::Matrix::Random(4, 1));
        const auto g = drbf::sequence_loss_gradient(model, sites, frames, 0.1, 1e-4, std::nullopt);
        std::vector<double> p = model.pack();
        const std::vector<double> analytic = g.gradient.pack();
        double worst = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double step = 1e-6 * std::max(1.0, std::abs(p[i]));
            drbf::OperatorModel plus = model, minus = model;
            auto pp = p, pm = p;
            pp[i] += step;
            pm[i] -= step;
            plus.unpack(pp);
            minus.unpack(pm);
            const double fd = (drbf::sequence_loss(plus, sites, frames, 0.1, 1e-4, std::nullopt) -
                               drbf::sequence_loss(minus, sites, frames, 0.1, 1e-4, std::nullopt)) /
                              (2.0 * step);
            worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1e-8, std::abs(fd) + std::abs(analytic[i])));
        }
        report("loss gradient against central differences", worst <= 1e-4, worst);
    }
    return all ? 0 : exit_numerical;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Meshfree learning of PDE dynamics from scattered time series"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Simulate a dataset of scattered measurement sequences");
    g->add_option("--config", gen.config, "JSON config file");
    g->add_option("-o,--out", gen.out, "Dataset JSON to write")->required();
    g->add_option("--pde", gen.pde, "wave, burgers_fisher or heat");
    g->add_option("--domain", gen.domain, "square, disk or annulus");
    g->add_option("--boundary", gen.boundary, "zero, angular or constant:<value>");
    g->add_option("--setting", gen.setting, "Test setting i, ii, iii or iv");
    g->add_option("--sequences", gen.sequences, "Number of sequences");
    g->add_option("--steps", gen.steps, "Recorded steps per sequence (K)");
    g->add_option("--dt", gen.dt, "Recorded time step");
    g->add_option("--resolution", gen.resolution, "Reference lattice points per axis");
    g->add_option("--n-interior", gen.n_interior, "Interior measurement sites");
    g->add_option("--n-boundary", gen.n_boundary, "Boundary measurement sites");
    g->add_option("--grid-resolution", gen.grid_resolution, "Evaluation grid points per axis (0 for none)");
    g->add_option("--noise", gen.noise, "Noise level relative to the per-variable SD");
    g->add_option("--site-seed", gen.site_seed, "Seed of the site selection");
    g->add_option("--seed", gen.seed, "Seed of the initial conditions and noise");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Fit an operator model to a dataset");
    t->add_option("--config", tr.config, "JSON config file");
    t->add_option("-d,--dataset", tr.dataset, "Training dataset JSON")->required();
    t->add_option("-o,--out", tr.out, "Checkpoint JSON to write")->required();
    t->add_option("--report", tr.report, "Per-epoch CSV report");
    t->add_option("--epochs", tr.epochs);
    t->add_option("--batch-size", tr.batch_size);
    t->add_option("--features", tr.features, "Derivative features per pair (h)");
    t->add_option("--lr", tr.learning_rate, "Adam learning rate");
    t->add_option("--lambda", tr.lambda, "Ridge parameter of the coefficient solve");
    t->add_option("--sigma0", tr.sigma0, "Initial kernel width");
    t->add_option("--linear", tr.linear, "Linear variant (true/false)");
    t->add_option("--loo", tr.loo, "Leave one site out per sample (true/false)");
    t->add_option("--seed", tr.seed);

    ForecastArgs fc;
    auto* f = app.add_subcommand("forecast", "Roll a model forward from one sequence of a dataset");
    f->add_option("-m,--model", fc.model)->required();
    f->add_option("-d,--dataset", fc.dataset)->required();
    f->add_option("-o,--out", fc.out, "Output prefix for <prefix>_sites.csv and <prefix>_queries.csv")->required();
    f->add_option("--sequence", fc.sequence, "Sequence index");
    f->add_option("--start", fc.start, "Index of the oldest seed frame");
    f->add_option("--steps", fc.steps, "Forecast steps");
    f->add_option("--seed", fc.seed);

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Forecast a test dataset and score it against persistence");
    e->add_option("--config", ev.config, "JSON config file");
    e->add_option("-m,--model", ev.model);
    e->add_option("-d,--dataset", ev.dataset);
    e->add_option("--setting", ev.setting, "i, ii, iii or iv");
    e->add_option("--horizon", ev.horizon);
    e->add_option("--start", ev.start);
    e->add_option("--metrics", ev.metrics, "Metrics CSV to write");
    e->add_option("--summary", ev.summary, "Summary JSON to write");
    e->add_option("--trajectories", ev.trajectories, "Prefix for trajectory CSVs");
    e->add_option("--seed", ev.seed);

    StabilityArgs st;
    auto* s = app.add_subcommand("stability", "Spectral radius of a linear model's transition matrix");
    s->add_option("-m,--model", st.model)->required();
    s->add_option("-d,--dataset", st.dataset, "Dataset supplying the sites and dt")->required();
    s->add_option("--dt", st.dt);
    s->add_option("--lambda", st.lambda);
    s->add_option("--seed", st.seed);

    std::uint64_t selftest_seed = 1;
    auto* x = app.add_subcommand("selftest", "Run built-in consistency checks");
    x->add_option("--seed", selftest_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        if (g->parsed()) return run_generate(gen);
        if (t->parsed()) return run_train(tr);
        if (f->parsed()) return run_forecast(fc);
        if (e->parsed()) return run_evaluate(ev);
        if (s->parsed()) return run_stability(st);
        if (x->parsed()) return run_selftest(selftest_seed);
    } catch (const drbf::ValidationError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return exit_validation;
    } catch (const drbf::NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return exit_numerical;
    } catch (const nlohmann::json::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return exit_validation;
    } catch (const std::exception& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return exit_numerical;
    }
    return 0;
}
