#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drbf/errors.hpp"
#include "drbf/forecast.hpp"
#include "drbf/geometry.hpp"
#include "drbf/loss.hpp"

namespace drbf {

struct MeasurementSequence {
    std::string id;
    Frames frames;                  // K+1 frames, each N x M
    std::vector<Matrix> grid_truth; // optional, K+1 frames of Q x M

    bool operator==(const MeasurementSequence&) const = default;
};

/// Time series on one shared site set, plus optional dense-grid truth.
struct Dataset {
    Domain domain = Domain::square(1.0);
    SiteSet sites;
    BoundarySpec boundary;
    double dt = 0.01;
    int variables = 1; // M
    int order = 1;     // p
    std::vector<MeasurementSequence> sequences;
    std::optional<PointMatrix> grid_points;
    nlohmann::json meta = nlohmann::json::object();

    int steps() const { return sequences.empty() ? 0 : static_cast<int>(sequences.front().frames.size()) - 1; }
};

inline bool operator==(const Dataset& a, const Dataset& b)
{
    return a.domain == b.domain && a.sites.points == b.sites.points && a.sites.boundary_count == b.sites.boundary_count &&
           a.boundary == b.boundary && a.dt == b.dt && a.variables == b.variables && a.order == b.order &&
           a.sequences == b.sequences && a.grid_points == b.grid_points && a.meta == b.meta;
}

namespace detail {

inline nlohmann::json points_to_json(const PointMatrix& p)
{
    auto out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < p.cols(); ++k) row.push_back(p(i, k));
        out.push_back(std::move(row));
    }
    return out;
}

inline nlohmann::json frames_to_json(const std::vector<Matrix>& frames)
{
    auto out = nlohmann::json::array();
    for (const auto& f : frames) {
        auto fj = nlohmann::json::array();
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            auto row = nlohmann::json::array();
            for (Eigen::Index m = 0; m < f.cols(); ++m) row.push_back(f(i, m));
            fj.push_back(std::move(row));
        }
        out.push_back(std::move(fj));
    }
    return out;
}

/// Field-path aware accessors for schema validation.
class JsonReader {
public:
    explicit JsonReader(std::string root) : root_(std::move(root)) {}

    const nlohmann::json& field(const nlohmann::json& obj, const std::string& name, const std::string& path) const
    {
        if (!obj.is_object()) fail(path, "expected an object");
        auto it = obj.find(name);
        if (it == obj.end()) fail(path, "missing field '" + name + "'");
        return *it;
    }

    double number(const nlohmann::json& v, const std::string& path) const
    {
        if (!v.is_number()) fail(path, "expected a number");
        return v.get<double>();
    }

    int integer(const nlohmann::json& v, const std::string& path) const
    {
        if (!v.is_number_integer()) fail(path, "expected an integer");
        return v.get<int>();
    }

    const nlohmann::json& array(const nlohmann::json& v, const std::string& path) const
    {
        if (!v.is_array()) fail(path, "expected an array");
        return v;
    }

    PointMatrix points(const nlohmann::json& v, int dim, const std::string& path) const
    {
        array(v, path);
        PointMatrix p(static_cast<Eigen::Index>(v.size()), dim);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string pi = path + "[" + std::to_string(i) + "]";
            array(v[i], pi);
            if (static_cast<int>(v[i].size()) != dim)
                fail(pi, "has " + std::to_string(v[i].size()) + " coordinates, expected " + std::to_string(dim));
            for (int k = 0; k < dim; ++k)
                p(static_cast<Eigen::Index>(i), k) = number(v[i][static_cast<std::size_t>(k)], pi);
        }
        return p;
    }

    std::vector<Matrix> frames(const nlohmann::json& v, Eigen::Index rows, int width, const std::string& path) const
    {
        array(v, path);
        std::vector<Matrix> out;
        for (std::size_t s = 0; s < v.size(); ++s) {
            const std::string ps = path + "[" + std::to_string(s) + "]";
            array(v[s], ps);
            if (static_cast<Eigen::Index>(v[s].size()) != rows)
                fail(ps, "has " + std::to_string(v[s].size()) + " rows, expected " + std::to_string(rows));
            Matrix f(rows, width);
            for (Eigen::Index i = 0; i < rows; ++i) {
                const auto& row = v[s][static_cast<std::size_t>(i)];
                const std::string pr = ps + "[" + std::to_string(i) + "]";
                array(row, pr);
                if (static_cast<int>(row.size()) != width)
                    fail(pr, "has " + std::to_string(row.size()) + " values, expected " + std::to_string(width));
                for (int m = 0; m < width; ++m) f(i, m) = number(row[static_cast<std::size_t>(m)], pr);
            }
            out.push_back(std::move(f));
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const
    {
        throw ValidationError(root_ + ": " + path + ": " + msg);
    }

private:
    std::string root_;
};

} // namespace detail

inline nlohmann::json domain_to_json(const Domain& d)
{
    return {{"kind", to_string(d.kind())}, {"params", d.params()}, {"dim", d.dim()}};
}

inline Domain domain_from_json(const nlohmann::json& j, const std::string& root = "domain")
{
    detail::JsonReader r(root);
    const auto& kind = r.field(j, "kind", "domain");
    if (!kind.is_string()) r.fail("domain.kind", "expected a string");
    std::vector<double> params;
    const auto& pj = r.array(r.field(j, "params", "domain"), "domain.params");
    for (std::size_t i = 0; i < pj.size(); ++i) params.push_back(r.number(pj[i], "domain.params"));
    const int dim = j.contains("dim") ? r.integer(j["dim"], "domain.dim") : 2;
    return Domain(domain_kind_from_string(kind.get<std::string>()), params, dim);
}

inline nlohmann::json dataset_to_json(const Dataset& ds)
{
    nlohmann::json j;
    j["format"] = "drbf-dataset";
    j["version"] = 1;
    j["domain"] = domain_to_json(ds.domain);
    j["sites"] = detail::points_to_json(ds.sites.points);
    j["boundary_count"] = ds.sites.boundary_count;
    j["boundary"] = ds.boundary.name();
    j["dt"] = ds.dt;
    j["M"] = ds.variables;
    j["p"] = ds.order;
    j["meta"] = ds.meta;
    auto seqs = nlohmann::json::array();
    for (const auto& s : ds.sequences) seqs.push_back({{"id", s.id}, {"frames", detail::frames_to_json(s.frames)}});
    j["sequences"] = std::move(seqs);
    if (ds.grid_points) {
        auto gf = nlohmann::json::array();
        for (const auto& s : ds.sequences) gf.push_back(detail::frames_to_json(s.grid_truth));
        j["grid_truth"] = {{"points", detail::points_to_json(*ds.grid_points)}, {"frames", std::move(gf)}};
    }
    return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j)
{
    detail::JsonReader r("dataset");
    Dataset ds;
    ds.domain = domain_from_json(r.field(j, "domain", "<root>"), "dataset");
    const int dim = ds.domain.dim();
    ds.sites.points = r.points(r.field(j, "sites", "<root>"), dim, "sites");
    ds.sites.boundary_count = r.integer(r.field(j, "boundary_count", "<root>"), "boundary_count");
    if (ds.sites.boundary_count < 0 || ds.sites.boundary_count > ds.sites.size())
        r.fail("boundary_count", "out of range for " + std::to_string(ds.sites.size()) + " sites");
    ds.dt = r.number(r.field(j, "dt", "<root>"), "dt");
    if (!(ds.dt > 0.0)) r.fail("dt", "must be positive");
    ds.variables = r.integer(r.field(j, "M", "<root>"), "M");
    ds.order = r.integer(r.field(j, "p", "<root>"), "p");
    if (ds.variables < 1) r.fail("M", "must be positive");
    if (ds.order < 1) r.fail("p", "must be positive");
    if (j.contains("boundary")) {
        if (!j["boundary"].is_string()) r.fail("boundary", "expected a string");
        ds.boundary = BoundarySpec::from_string(j["boundary"].get<std::string>());
    }
    if (j.contains("meta")) ds.meta = j["meta"];

    const auto& seqs = r.array(r.field(j, "sequences", "<root>"), "sequences");
    std::size_t frame_count = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        const std::string ps = "sequences[" + std::to_string(s) + "]";
        MeasurementSequence seq;
        const auto& id = r.field(seqs[s], "id", ps);
        seq.id = id.is_string() ? id.get<std::string>() : id.dump();
        seq.frames = r.frames(r.field(seqs[s], "frames", ps), ds.sites.size(), ds.variables, ps + ".frames");
        if (seq.frames.empty()) r.fail(ps + ".frames", "no frames");
        if (s == 0) frame_count = seq.frames.size();
        if (seq.frames.size() != frame_count) r.fail(ps + ".frames", "frame count differs from sequences[0]");
        ds.sequences.push_back(std::move(seq));
    }

    if (j.contains("grid_truth") && !j["grid_truth"].is_null()) {
        const auto& g = j["grid_truth"];
        ds.grid_points = r.points(r.field(g, "points", "grid_truth"), dim, "grid_truth.points");
        const auto& gf = r.array(r.field(g, "frames", "grid_truth"), "grid_truth.frames");
        if (gf.size() != ds.sequences.size()) r.fail("grid_truth.frames", "needs one entry per sequence");
        for (std::size_t s = 0; s < gf.size(); ++s) {
            const std::string ps = "grid_truth.frames[" + std::to_string(s) + "]";
            ds.sequences[s].grid_truth = r.frames(gf[s], ds.grid_points->rows(), ds.variables, ps);
            if (ds.sequences[s].grid_truth.size() != ds.sequences[s].frames.size())
                r.fail(ps, "frame count differs from the site frames");
        }
    }
    return ds;
}

inline std::string dataset_to_string(const Dataset& ds) { return dataset_to_json(ds).dump(); }

inline void write_dataset(const std::string& path, const Dataset& ds)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << dataset_to_string(ds);
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline Dataset read_dataset(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("dataset '" + path + "' is not valid JSON: " + e.what());
    }
    return dataset_from_json(j);
}

} // namespace drbf
