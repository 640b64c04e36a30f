#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "drbf/errors.hpp"
#include "drbf/geometry.hpp"
#include "drbf/loss.hpp"
#include "drbf/operator_model.hpp"

namespace drbf {

/// Dirichlet data g(t, x), applied to every variable. `constant` is an
/// extra preset used for stationary-solution checks.
struct BoundarySpec {
    enum class Preset { zero, angular, constant };
    Preset preset = Preset::zero;
    double level = 0.0;

    static BoundarySpec zero() { return {Preset::zero, 0.0}; }
    static BoundarySpec angular() { return {Preset::angular, 0.0}; }
    static BoundarySpec constant(double c) { return {Preset::constant, c}; }

    double value(double /*t*/, const Point& x) const
    {
        switch (preset) {
        case Preset::zero: return 0.0;
        case Preset::constant: return level;
        case Preset::angular: break;
        }
        return 0.2 * std::sin(std::atan2(x[1], x[0]));
    }

    /// "zero", "angular" or "constant:<value>".
    std::string name() const
    {
        switch (preset) {
        case Preset::zero: return "zero";
        case Preset::angular: return "angular";
        case Preset::constant: break;
        }
        std::array<char, 32> buf{};
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), level);
        return "constant:" + std::string(buf.data(), res.ptr);
    }

    static BoundarySpec from_string(const std::string& s)
    {
        if (s == "zero") return zero();
        if (s == "angular") return angular();
        static const std::string prefix = "constant:";
        if (s.starts_with(prefix)) {
            const std::string num = s.substr(prefix.size());
            double v = 0.0;
            const auto res = std::from_chars(num.data(), num.data() + num.size(), v);
            if (res.ec == std::errc() && res.ptr == num.data() + num.size() && std::isfinite(v)) return constant(v);
        }
        throw ValidationError("unknown boundary preset '" + s + "' (expected zero, angular or constant:<value>)");
    }

    bool operator==(const BoundarySpec&) const = default;
};

inline double boundary_value(const BoundarySpec& bc, double t, const Point& x) { return bc.value(t, x); }

/// Trajectories produced by a rollout. Entry k holds the state after k+1 steps.
struct Rollout {
    std::vector<double> times;
    std::vector<Matrix> sites;   // N x M each
    std::vector<Matrix> queries; // Q x M each, empty without query points
};

/// Repeatedly applies the learned one-step map at the sites, overwriting
/// boundary sites with g(t + dt, x). After each step the RBF expansion of the
/// new state is evaluated at the query points.
///
/// `initial` holds p frames, oldest first; the newest is at time `t0`.
inline Rollout forecast(const OperatorModel& model, const SiteSet& sites, const std::vector<Matrix>& initial,
                        const BoundarySpec& boundary, int steps, double dt, const PointMatrix* queries = nullptr,
                        std::optional<double> lambda = std::nullopt, double t0 = 0.0)
{
    model.validate();
    const double ridge = lambda.value_or(model.lambda);
    const auto n = sites.size();
    detail::require(sites.dim() == model.dim, "forecast: site dimension differs from the model dimension");
    detail::require(static_cast<int>(initial.size()) == model.order,
                    "forecast: expected " + std::to_string(model.order) + " initial frames");
    for (const auto& f : initial)
        detail::require(f.rows() == n && f.cols() == model.variables, "forecast: initial frame shape mismatch");
    detail::require(steps >= 0, "forecast: negative step count");
    if (queries) detail::require(queries->cols() == model.dim, "forecast: query dimension mismatch");

    const DerivativeTensor d = assemble_d_tensor(model, sites.points, sites.points);
    const RidgeSolver solver(assemble_phi(model.kernel, sites.points, sites.points), ridge);
    Matrix phi_q;
    if (queries) phi_q = assemble_phi(model.kernel, *queries, sites.points);

    std::vector<Matrix> history(initial.rbegin(), initial.rend()); // newest first
    Rollout out;
    for (int k = 0; k < steps; ++k) {
        const double t_next = t0 + (k + 1) * dt;
        Matrix next;
        try {
            const Matrix coeffs = solver.solve(history.front());
            const Matrix z = contract_features(d, coeffs);
            const Matrix rhs = model.is_linear() ? z : Matrix(model.fnet->forward(Matrix(z.transpose())).transpose());
            next = temporal_update(history, rhs, model.order, dt);
        } catch (const std::exception& e) {
            throw NumericalError("forecast failed at step " + std::to_string(k + 1) + ": " + e.what());
        }
        for (int i = sites.interior_count(); i < n; ++i) next.row(i).setConstant(boundary.value(t_next, sites.point(i)));
        if (!next.allFinite()) throw NumericalError("forecast: non-finite state at step " + std::to_string(k + 1));

        if (queries) {
            try {
                out.queries.push_back(phi_q * solver.solve(next));
            } catch (const std::exception& e) {
                throw NumericalError("forecast failed at step " + std::to_string(k + 1) + ": " + e.what());
            }
        }
        out.times.push_back(t_next);
        out.sites.push_back(next);
        history.insert(history.begin(), next);
        history.pop_back();
    }
    return out;
}

} // namespace drbf
