#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "drbf/errors.hpp"
#include "drbf/forecast.hpp"
#include "drbf/geometry.hpp"

namespace drbf {

enum class PdeKind { wave, burgers_fisher, heat };

inline std::string to_string(PdeKind k)
{
    switch (k) {
    case PdeKind::wave: return "wave";
    case PdeKind::burgers_fisher: return "burgers_fisher";
    case PdeKind::heat: return "heat";
    }
    return "?";
}

inline PdeKind pde_kind_from_string(const std::string& s)
{
    if (s == "wave") return PdeKind::wave;
    if (s == "burgers_fisher") return PdeKind::burgers_fisher;
    if (s == "heat") return PdeKind::heat;
    throw ValidationError("unknown pde kind '" + s + "'");
}

struct PdeSpec {
    PdeKind kind = PdeKind::wave;
    double wave_speed = 0.1;  // v
    double viscosity = 0.1;   // nu
    double reaction = 1.0;    // alpha
    double diffusivity = 0.1; // kappa

    int order() const { return kind == PdeKind::wave ? 2 : 1; }
    int variables() const { return kind == PdeKind::burgers_fisher ? 2 : 1; }

    void validate() const
    {
        switch (kind) {
        case PdeKind::wave: detail::require(wave_speed > 0.0, "wave speed must be positive"); break;
        case PdeKind::burgers_fisher:
            detail::require(viscosity > 0.0 && reaction > 0.0, "Burgers-Fisher parameters must be positive");
            break;
        case PdeKind::heat: detail::require(diffusivity > 0.0, "diffusivity must be positive"); break;
        }
    }
};

/// a exp(-eps |x - z|^2).
struct GaussianBump {
    double amplitude = 1.0;
    double sharpness = 10.0;
    Point center = Point::Zero(2);

    double operator()(const Point& x) const { return amplitude * std::exp(-sharpness * (x - center).squaredNorm()); }
};

/// sum over integer |w|, |b| < 4 of lambda cos(w x1 + b x2) + gamma sin(w x1 + b x2),
/// one table pair per variable. Index (w + 3) * 7 + (b + 3).
struct FourierTable {
    static constexpr int max_frequency = 3;
    static constexpr int pairs = (2 * max_frequency + 1) * (2 * max_frequency + 1);
    std::vector<std::array<double, pairs>> cos_coef;
    std::vector<std::array<double, pairs>> sin_coef;

    double operator()(const Point& x, int m) const
    {
        double s = 0.0;
        int k = 0;
        for (int w = -max_frequency; w <= max_frequency; ++w)
            for (int b = -max_frequency; b <= max_frequency; ++b, ++k) {
                const double arg = w * x[0] + b * x[1];
                s += cos_coef[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] * std::cos(arg) +
                     sin_coef[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] * std::sin(arg);
            }
        return s;
    }
};

/// Arbitrary field, mostly for tests and analytic checks.
struct FieldFunction {
    std::function<double(const Point&, int)> f;
};

using InitialCondition = std::variant<GaussianBump, FourierTable, FieldFunction>;

inline double initial_value(const InitialCondition& ic, const Point& x, int m)
{
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, GaussianBump>) return c(x);
            else if constexpr (std::is_same_v<T, FourierTable>) return c(x, m);
            else return c.f(x, m);
        },
        ic);
}

/// Regular 2D lattice over the bounding box, classified against the domain.
///
/// Nodes closer than h/4 to the boundary are Dirichlet nodes. An interior
/// node whose neighbour lies outside uses the boundary crossing on that
/// grid line instead (non-uniform three-point stencil).
class Lattice {
public:
    enum class NodeType : char { exterior, dirichlet, interior };

    struct Arm {
        int neighbor = -1;    // node index, or -1 for a boundary crossing
        double spacing = 0.0; // distance to the neighbour or crossing
        Point crossing;       // valid when neighbor == -1
    };

    Lattice(const Domain& domain, int resolution) : domain_(domain), res_(resolution)
    {
        detail::require(domain.dim() == 2, "reference solver: only two-dimensional domains are supported");
        detail::require(resolution >= 3, "reference solver: resolution must be at least 3");
        const double e = domain.extent();
        h_ = 2.0 * e / (resolution - 1);
        const int n = resolution * resolution;
        coords_.resize(n, 2);
        type_.assign(static_cast<std::size_t>(n), NodeType::exterior);
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i) {
                const int k = index(i, j);
                coords_(k, 0) = -e + h_ * i;
                coords_(k, 1) = -e + h_ * j;
                const Point x = coords_.row(k).transpose();
                if (!domain.contains(x)) continue;
                type_[static_cast<std::size_t>(k)] =
                    domain.boundary_distance(x) < 0.25 * h_ ? NodeType::dirichlet : NodeType::interior;
            }
        arms_.resize(static_cast<std::size_t>(n));
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i) {
                const int k = index(i, j);
                if (type_[static_cast<std::size_t>(k)] != NodeType::interior) continue;
                interior_.push_back(k);
                const Point x = coords_.row(k).transpose();
                const std::array<std::array<int, 3>, 4> dirs{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 1}, {0, -1, 1}}};
                auto& arms = arms_[static_cast<std::size_t>(k)];
                double diag = 0.0;
                for (std::size_t a = 0; a < 4; ++a) {
                    const int di = dirs[a][0], dj = dirs[a][1], axis = dirs[a][2];
                    const int nb = index(i + di, j + dj);
                    Arm arm;
                    if (type_[static_cast<std::size_t>(nb)] != NodeType::exterior) {
                        arm.neighbor = nb;
                        arm.spacing = h_;
                    } else {
                        const int sign = axis == 0 ? di : dj;
                        arm.spacing = std::min(domain.axis_exit_distance(x, axis, sign), h_);
                        arm.crossing = x;
                        arm.crossing[axis] += sign * arm.spacing;
                        min_spacing_ = std::min(min_spacing_, arm.spacing);
                    }
                    arms[a] = arm;
                }
                for (int axis = 0; axis < 2; ++axis)
                    diag += 2.0 / (arms[2 * axis].spacing * arms[2 * axis + 1].spacing);
                max_diag_ = std::max(max_diag_, diag);
            }
    }

    int resolution() const { return res_; }
    double spacing() const { return h_; }
    int size() const { return res_ * res_; }
    int index(int i, int j) const { return j * res_ + i; }
    const PointMatrix& coords() const { return coords_; }
    Point point(int k) const { return coords_.row(k).transpose(); }
    NodeType type(int k) const { return type_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& interior_nodes() const { return interior_; }
    const std::array<Arm, 4>& arms(int k) const { return arms_[static_cast<std::size_t>(k)]; }
    const Domain& domain() const { return domain_; }
    double smallest_arm() const { return min_spacing_; }

    /// Upper bound on the spectral radius of the discrete Laplacian.
    double laplacian_bound() const { return 2.0 * max_diag_; }

private:
    Domain domain_;
    int res_;
    double h_ = 0.0;
    PointMatrix coords_;
    std::vector<NodeType> type_;
    std::vector<std::array<Arm, 4>> arms_;
    std::vector<int> interior_;
    double max_diag_ = 0.0;
    double min_spacing_ = std::numeric_limits<double>::infinity();
};

/// Stored frames of a reference solution on the full lattice (nodes x M).
/// Exterior nodes hold the boundary data extended off the domain.
struct FineTrajectory {
    std::shared_ptr<const Lattice> lattice;
    BoundarySpec boundary;
    double dt_fine = 0.0;
    double record_interval = 0.0;
    std::vector<double> times;
    std::vector<Matrix> frames;
};

struct SolverOptions {
    int resolution = 101;
    double horizon = 2.0;
    /// Spacing of stored frames; must be a multiple of the fine step.
    double record_interval = 0.01;
    /// Fine step; chosen as half the stability bound (rounded to divide the
    /// record interval) when absent.
    std::optional<double> dt_fine;
};

namespace detail {

inline double arm_value(const Lattice::Arm& arm, const Matrix& u, int m, const BoundarySpec& bc,
                        double t)
{
    return arm.neighbor >= 0 ? u(arm.neighbor, m) : bc.value(t, arm.crossing);
}

inline double laplacian_at(const Lattice& lat, int k, const Matrix& u, int m, const BoundarySpec& bc, double t)
{
    const auto& arms = lat.arms(k);
    const double up = u(k, m);
    double lap = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        const auto& plus = arms[static_cast<std::size_t>(2 * axis)];
        const auto& minus = arms[static_cast<std::size_t>(2 * axis + 1)];
        const double fp = (arm_value(plus, u, m, bc, t) - up) / plus.spacing;
        const double fm = (up - arm_value(minus, u, m, bc, t)) / minus.spacing;
        lap += 2.0 * (fp - fm) / (plus.spacing + minus.spacing);
    }
    return lap;
}

/// First-order upwind derivative along `axis` for advection speed `a`.
inline double upwind_at(const Lattice& lat, int k, const Matrix& u, int m, int axis, double a, const BoundarySpec& bc,
                        double t)
{
    const auto& arms = lat.arms(k);
    if (a > 0.0) {
        const auto& minus = arms[static_cast<std::size_t>(2 * axis + 1)];
        return (u(k, m) - arm_value(minus, u, m, bc, t)) / minus.spacing;
    }
    const auto& plus = arms[static_cast<std::size_t>(2 * axis)];
    return (arm_value(plus, u, m, bc, t) - u(k, m)) / plus.spacing;
}

inline void apply_boundary(const Lattice& lat, Matrix& u, const BoundarySpec& bc, double t)
{
    for (int k = 0; k < lat.size(); ++k) {
        if (lat.type(k) == Lattice::NodeType::interior) continue;
        const Point x = lat.point(k);
        const bool origin = bc.preset == BoundarySpec::Preset::angular && x.squaredNorm() == 0.0;
        u.row(k).setConstant(origin ? 0.0 : bc.value(t, x));
    }
}

} // namespace detail

/// Stability bound on the fine step for the explicit scheme of `spec`.
inline double stability_bound(const PdeSpec& spec, const Lattice& lat, double max_abs_u = 1.0)
{
    const double rho = lat.laplacian_bound();
    switch (spec.kind) {
    case PdeKind::wave: return 2.0 / (spec.wave_speed * std::sqrt(rho));
    case PdeKind::heat: return 2.0 / (spec.diffusivity * rho);
    case PdeKind::burgers_fisher: {
        const double umax = std::max(1.0, max_abs_u);
        const double arm = std::min(lat.smallest_arm(), lat.spacing());
        const double rate = 0.5 * spec.viscosity * rho + 2.0 * umax / arm + spec.reaction * (1.0 + 2.0 * umax);
        return 1.0 / rate;
    }
    }
    return 0.0;
}

/// Explicit finite-difference reference solution on a masked lattice:
/// leapfrog for the wave equation (released from rest), forward Euler with
/// upwinded advection for the parabolic kinds. Dirichlet data is imposed on
/// boundary nodes at every step, including t = 0.
inline FineTrajectory solve_reference(const PdeSpec& spec, const Domain& domain, const InitialCondition& ic,
                                      const BoundarySpec& bc, const SolverOptions& opt)
{
    spec.validate();
    detail::require(opt.horizon > 0.0 && opt.record_interval > 0.0, "reference solver: horizon and record interval must be positive");
    const auto lat = std::make_shared<const Lattice>(domain, opt.resolution);
    const int n = lat->size();
    const int mvars = spec.variables();

    Matrix u(n, mvars);
    double max_abs = 0.0;
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < mvars; ++m) {
            u(k, m) = initial_value(ic, lat->point(k), m);
            max_abs = std::max(max_abs, std::abs(u(k, m)));
        }
    if (!u.allFinite()) throw NumericalError("reference solver: non-finite initial condition");
    detail::apply_boundary(*lat, u, bc, 0.0);

    const double bound = stability_bound(spec, *lat, 1.5 * max_abs);
    double dt = 0.0;
    int sub = 0;
    if (opt.dt_fine) {
        dt = *opt.dt_fine;
        if (!(dt > 0.0) || dt > bound)
            throw ValidationError("reference solver: fine step " + std::to_string(dt) + " violates the stability bound " +
                                  std::to_string(bound));
        const double ratio = opt.record_interval / dt;
        sub = static_cast<int>(std::lround(ratio));
        if (sub < 1 || std::abs(ratio - sub) > 1e-9 * ratio)
            throw ValidationError("reference solver: record interval must be a multiple of the fine step");
    } else {
        sub = std::max(1, static_cast<int>(std::ceil(opt.record_interval / (0.5 * bound) - 1e-12)));
        dt = opt.record_interval / sub;
    }
    const int records = static_cast<int>(std::lround(opt.horizon / opt.record_interval));
    detail::require(records >= 1 && std::abs(records * opt.record_interval - opt.horizon) < 1e-9 * opt.horizon,
                    "reference solver: horizon must be a multiple of the record interval");

    FineTrajectory out;
    out.lattice = lat;
    out.boundary = bc;
    out.dt_fine = dt;
    out.record_interval = opt.record_interval;
    out.times.push_back(0.0);
    out.frames.push_back(u);

    const auto& interior = lat->interior_nodes();
    Matrix prev, next(n, mvars);
    if (spec.kind == PdeKind::wave) {
        // u(-dt) from a Taylor start at rest; symmetric with u(dt)
        prev = u;
        const double c2 = spec.wave_speed * spec.wave_speed;
        for (int k : interior) prev(k, 0) = u(k, 0) + 0.5 * dt * dt * c2 * detail::laplacian_at(*lat, k, u, 0, bc, 0.0);
    }

    const long total = static_cast<long>(records) * sub;
    for (long step = 1; step <= total; ++step) {
        const double t = (step - 1) * dt;
        const double t_next = step * dt;
        next = u;
        switch (spec.kind) {
        case PdeKind::wave: {
            const double c2 = spec.wave_speed * spec.wave_speed;
            for (int k : interior)
                next(k, 0) = 2.0 * u(k, 0) - prev(k, 0) + dt * dt * c2 * detail::laplacian_at(*lat, k, u, 0, bc, t);
            break;
        }
        case PdeKind::heat:
            for (int k : interior) next(k, 0) = u(k, 0) + dt * spec.diffusivity * detail::laplacian_at(*lat, k, u, 0, bc, t);
            break;
        case PdeKind::burgers_fisher:
            for (int k : interior) {
                const double a0 = u(k, 0), a1 = u(k, 1);
                for (int m = 0; m < 2; ++m) {
                    const double um = u(k, m);
                    const double adv = a0 * detail::upwind_at(*lat, k, u, m, 0, a0, bc, t) +
                                       a1 * detail::upwind_at(*lat, k, u, m, 1, a1, bc, t);
                    next(k, m) = um + dt * (spec.viscosity * detail::laplacian_at(*lat, k, u, m, bc, t) - adv +
                                            spec.reaction * um * (1.0 - um));
                }
            }
            break;
        }
        detail::apply_boundary(*lat, next, bc, t_next);
        if (!next.allFinite()) throw NumericalError("reference solver: non-finite state at t = " + std::to_string(t_next));
        if (spec.kind == PdeKind::wave) prev = u;
        std::swap(u, next);
        if (step % sub == 0) {
            out.times.push_back(t_next);
            out.frames.push_back(u);
        }
    }
    return out;
}

/// Bilinear interpolation of one stored frame at arbitrary points.
inline Matrix interpolate_frame(const FineTrajectory& traj, std::size_t frame, const PointMatrix& points)
{
    const Lattice& lat = *traj.lattice;
    const double e = lat.domain().extent();
    const double h = lat.spacing();
    const int res = lat.resolution();
    const Matrix& u = traj.frames.at(frame);
    Matrix out(points.rows(), u.cols());
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
        const double gx = (points(p, 0) + e) / h, gy = (points(p, 1) + e) / h;
        const double tol = 1e-9;
        if (gx < -tol || gy < -tol || gx > res - 1 + tol || gy > res - 1 + tol)
            throw ValidationError("interpolate_frame: point lies outside the lattice");
        const int i = std::clamp(static_cast<int>(std::floor(gx)), 0, res - 2);
        const int j = std::clamp(static_cast<int>(std::floor(gy)), 0, res - 2);
        const double fx = std::clamp(gx - i, 0.0, 1.0), fy = std::clamp(gy - j, 0.0, 1.0);
        out.row(p) = (1 - fx) * (1 - fy) * u.row(lat.index(i, j)) + fx * (1 - fy) * u.row(lat.index(i + 1, j)) +
                     (1 - fx) * fy * u.row(lat.index(i, j + 1)) + fx * fy * u.row(lat.index(i + 1, j + 1));
    }
    return out;
}

} // namespace drbf
