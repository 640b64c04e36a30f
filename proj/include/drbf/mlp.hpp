#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drbf/errors.hpp"
#include "drbf/types.hpp"

namespace drbf {

struct DenseLayer {
    Matrix weights; // out x in
    Vector bias;

    int inputs() const { return static_cast<int>(weights.cols()); }
    int outputs() const { return static_cast<int>(weights.rows()); }
};

/// Activations kept by a forward pass. `inputs[l]` is what layer l saw and
/// `pre[l]` its affine output before the activation.
struct MlpCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
};

struct MlpGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;

    MlpGradient& operator+=(const MlpGradient& o)
    {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += o.weights[l];
            bias[l] += o.bias[l];
        }
        return *this;
    }
};

/// Fully connected network: ReLU on hidden layers, identity on the output.
class Mlp {
public:
    Mlp() = default;

    /// Zero-initialised network with the given layer widths.
    explicit Mlp(const std::vector<int>& layer_sizes)
    {
        detail::require(layer_sizes.size() >= 2, "Mlp: need at least input and output widths");
        for (int s : layer_sizes) detail::require(s >= 1, "Mlp: layer widths must be positive");
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            layers_.push_back({Matrix::Zero(layer_sizes[l + 1], layer_sizes[l]), Vector::Zero(layer_sizes[l + 1])});
    }

    /// Glorot-uniform weights, zero biases.
    static Mlp glorot(const std::vector<int>& layer_sizes, std::mt19937_64& rng)
    {
        Mlp net(layer_sizes);
        for (auto& layer : net.layers_) {
            const double limit = std::sqrt(6.0 / (layer.inputs() + layer.outputs()));
            std::uniform_real_distribution<double> u(-limit, limit);
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = u(rng);
        }
        return net;
    }

    static Mlp from_layers(std::vector<DenseLayer> layers)
    {
        detail::require(!layers.empty(), "Mlp: no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            detail::require(layers[l].bias.size() == layers[l].weights.rows(),
                            "Mlp: layer " + std::to_string(l) + " bias length differs from its output width");
            if (l > 0)
                detail::require(layers[l].inputs() == layers[l - 1].outputs(),
                                "Mlp: layer " + std::to_string(l) + " input width does not match the previous layer");
            detail::require(layers[l].weights.allFinite() && layers[l].bias.allFinite(),
                            "Mlp: non-finite parameters in layer " + std::to_string(l));
        }
        Mlp net;
        net.layers_ = std::move(layers);
        return net;
    }

    int input_width() const { return layers_.front().inputs(); }
    int output_width() const { return layers_.back().outputs(); }
    std::size_t depth() const { return layers_.size(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    std::vector<int> layer_sizes() const
    {
        std::vector<int> s{input_width()};
        for (const auto& l : layers_) s.push_back(l.outputs());
        return s;
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    /// Batch forward pass; one sample per column.
    Matrix forward(const Matrix& input, MlpCache* cache = nullptr) const
    {
        if (input.rows() != input_width())
            throw ValidationError("Mlp::forward: input width " + std::to_string(input.rows()) + ", expected " +
                                  std::to_string(input_width()));
        if (!input.allFinite()) throw ValidationError("Mlp::forward: non-finite input");
        if (cache) {
            cache->inputs.clear();
            cache->pre.clear();
        }
        Matrix a = input;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Matrix z = layers_[l].weights * a;
            z.colwise() += layers_[l].bias;
            if (cache) {
                cache->inputs.push_back(std::move(a));
                cache->pre.push_back(z);
            }
            a = l + 1 < layers_.size() ? Matrix(z.cwiseMax(0.0)) : std::move(z);
        }
        return a;
    }

    Vector forward(const Vector& input) const { return forward(Matrix(input)).col(0); }

    /// Reverse-mode pass. `upstream` is dL/d(output), one column per sample.
    /// Gradients are summed over the batch. ReLU'(0) is taken as 0.
    MlpGradient backward(const MlpCache& cache, const Matrix& upstream, Matrix* input_grad = nullptr) const
    {
        if (cache.pre.size() != layers_.size()) throw ValidationError("Mlp::backward: cache does not match network depth");
        if (upstream.rows() != output_width() || upstream.cols() != cache.pre.back().cols())
            throw ValidationError("Mlp::backward: upstream gradient shape mismatch");
        MlpGradient g;
        g.weights.resize(layers_.size());
        g.bias.resize(layers_.size());
        Matrix delta = upstream;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) delta = delta.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
            g.weights[l] = delta * cache.inputs[l].transpose();
            g.bias[l] = delta.rowwise().sum();
            if (l > 0 || input_grad) delta = layers_[l].weights.transpose() * delta;
        }
        if (input_grad) *input_grad = std::move(delta);
        return g;
    }

    MlpGradient zero_gradient() const
    {
        MlpGradient g;
        for (const auto& l : layers_) {
            g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            g.bias.push_back(Vector::Zero(l.bias.size()));
        }
        return g;
    }

    /// Appends parameters (row-major weights, then bias, per layer).
    void pack(std::vector<double>& out) const
    {
        for (const auto& l : layers_) {
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias[r]);
        }
    }

    /// Reads parameters written by `pack`; returns the number consumed.
    std::size_t unpack(std::span<const double> in)
    {
        std::size_t k = 0;
        for (auto& l : layers_) {
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = in[k++];
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = in[k++];
        }
        return k;
    }

    static void pack(const MlpGradient& g, std::vector<double>& out)
    {
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            for (Eigen::Index r = 0; r < g.weights[l].rows(); ++r)
                for (Eigen::Index c = 0; c < g.weights[l].cols(); ++c) out.push_back(g.weights[l](r, c));
            for (Eigen::Index r = 0; r < g.bias[l].size(); ++r) out.push_back(g.bias[l][r]);
        }
    }

    bool operator==(const Mlp& o) const
    {
        if (layers_.size() != o.layers_.size()) return false;
        for (std::size_t l = 0; l < layers_.size(); ++l)
            if (layers_[l].weights != o.layers_[l].weights || layers_[l].bias != o.layers_[l].bias) return false;
        return true;
    }

private:
    std::vector<DenseLayer> layers_;
};

inline Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache = nullptr)
{
    return net.forward(input, cache);
}

inline MlpGradient mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& upstream, Matrix* input_grad = nullptr)
{
    return net.backward(cache, upstream, input_grad);
}

} // namespace drbf
