#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "drbf/errors.hpp"

namespace drbf {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators over a flat parameter vector.
struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads)
{
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ValidationError("adam_step: parameter, gradient and state sizes differ");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient");
    const auto& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
}

} // namespace drbf
