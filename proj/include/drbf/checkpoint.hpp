#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "drbf/errors.hpp"
#include "drbf/operator_model.hpp"

namespace drbf {

inline constexpr int checkpoint_version = 1;

namespace detail {

inline nlohmann::json mlp_to_json(const Mlp& net)
{
    nlohmann::json j;
    j["layer_sizes"] = net.layer_sizes();
    auto w = nlohmann::json::array();
    auto b = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        std::vector<double> flat;
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat.push_back(l.weights(r, c));
        w.push_back(flat);
        b.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
    }
    j["weights"] = std::move(w);
    j["biases"] = std::move(b);
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j, const std::string& name)
{
    auto fail = [&](const std::string& m) -> void { throw ValidationError("checkpoint: " + name + ": " + m); };
    if (!j.is_object()) fail("expected an object");
    for (const char* k : {"layer_sizes", "weights", "biases"})
        if (!j.contains(k) || !j[k].is_array()) fail(std::string("missing array '") + k + "'");
    const auto sizes = j["layer_sizes"].get<std::vector<int>>();
    if (sizes.size() < 2) fail("needs at least two layer sizes");
    const std::size_t layers = sizes.size() - 1;
    if (j["weights"].size() != layers || j["biases"].size() != layers) fail("weights/biases count differs from layer count");
    std::vector<DenseLayer> out;
    for (std::size_t l = 0; l < layers; ++l) {
        const auto w = j["weights"][l].get<std::vector<double>>();
        const auto b = j["biases"][l].get<std::vector<double>>();
        const int in = sizes[l], outw = sizes[l + 1];
        if (in < 1 || outw < 1) fail("layer widths must be positive");
        if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(outw))
            fail("layer " + std::to_string(l) + " has " + std::to_string(w.size()) + " weights, expected " +
                 std::to_string(in * outw));
        if (b.size() != static_cast<std::size_t>(outw))
            fail("layer " + std::to_string(l) + " has " + std::to_string(b.size()) + " biases, expected " +
                 std::to_string(outw));
        DenseLayer layer{Matrix(outw, in), Vector(outw)};
        for (int r = 0; r < outw; ++r)
            for (int c = 0; c < in; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
        for (int r = 0; r < outw; ++r) layer.bias[r] = b[static_cast<std::size_t>(r)];
        out.push_back(std::move(layer));
    }
    return Mlp::from_layers(std::move(out));
}

} // namespace detail

inline nlohmann::json checkpoint_to_json(const OperatorModel& m)
{
    nlohmann::json j;
    j["format"] = "drbf-checkpoint";
    j["version"] = checkpoint_version;
    j["sigma"] = m.kernel.sigma;
    j["p"] = m.order;
    j["h"] = m.features;
    j["M"] = m.variables;
    j["d"] = m.dim;
    j["lambda"] = m.lambda;
    j["L_net"] = detail::mlp_to_json(m.lnet);
    j["F_net"] = m.fnet ? detail::mlp_to_json(*m.fnet) : nlohmann::json(nullptr);
    return j;
}

inline OperatorModel checkpoint_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw ValidationError("checkpoint: expected a JSON object");
    if (j.contains("version") && j["version"] != checkpoint_version)
        throw ValidationError("checkpoint: unsupported version " + j["version"].dump());
    for (const char* k : {"sigma", "p", "h", "M", "d", "lambda", "L_net", "F_net"})
        if (!j.contains(k)) throw ValidationError(std::string("checkpoint: missing field '") + k + "'");
    OperatorModel m;
    try {
        m.kernel = RbfKernel(j["sigma"].get<double>());
        m.order = j["p"].get<int>();
        m.features = j["h"].get<int>();
        m.variables = j["M"].get<int>();
        m.dim = j["d"].get<int>();
        m.lambda = j["lambda"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
    m.lnet = detail::mlp_from_json(j["L_net"], "L_net");
    if (!j["F_net"].is_null()) m.fnet = detail::mlp_from_json(j["F_net"], "F_net");
    m.validate();
    return m;
}

inline void save_checkpoint(const OperatorModel& m, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << checkpoint_to_json(m).dump(1);
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline OperatorModel load_checkpoint(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

} // namespace drbf
