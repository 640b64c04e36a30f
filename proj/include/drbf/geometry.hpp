#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drbf/errors.hpp"
#include "drbf/kmeans.hpp"
#include "drbf/types.hpp"

namespace drbf {

/// Tolerance (domain units) for deciding that a point lies on the boundary.
inline constexpr double boundary_tolerance = 1e-9;

/// Floor on the uniform sample clustered by `select_sites`.
inline constexpr int min_site_sample = 10000;

enum class DomainKind { square, disk, annulus };

inline std::string to_string(DomainKind k)
{
    switch (k) {
    case DomainKind::square: return "square";
    case DomainKind::disk: return "disk";
    case DomainKind::annulus: return "annulus";
    }
    return "?";
}

inline DomainKind domain_kind_from_string(const std::string& s)
{
    if (s == "square") return DomainKind::square;
    if (s == "disk") return DomainKind::disk;
    if (s == "annulus") return DomainKind::annulus;
    throw ValidationError("unknown domain kind '" + s + "'");
}

/// Closed domain centred at the origin: hypercube [-a, a]^d, ball of radius R,
/// or spherical shell r <= |x| <= R.
class Domain {
public:
    static Domain square(double half_width, int dim = 2) { return Domain(DomainKind::square, {half_width}, dim); }
    static Domain disk(double radius, int dim = 2) { return Domain(DomainKind::disk, {radius}, dim); }
    static Domain annulus(double inner, double outer, int dim = 2)
    {
        return Domain(DomainKind::annulus, {inner, outer}, dim);
    }

    Domain(DomainKind kind, std::vector<double> params, int dim) : kind_(kind), params_(std::move(params)), dim_(dim)
    {
        detail::require(dim_ >= 1, "domain dimension must be positive");
        const std::size_t expected = kind_ == DomainKind::annulus ? 2 : 1;
        detail::require(params_.size() == expected,
                        "domain '" + to_string(kind_) + "' expects " + std::to_string(expected) + " parameter(s)");
        for (double p : params_) detail::require(std::isfinite(p) && p > 0.0, "domain parameters must be positive");
        if (kind_ == DomainKind::annulus)
            detail::require(params_[0] < params_[1], "annulus inner radius must be below the outer radius");
    }

    DomainKind kind() const { return kind_; }
    const std::vector<double>& params() const { return params_; }
    int dim() const { return dim_; }

    /// Half-width of the axis-aligned bounding box.
    double extent() const { return kind_ == DomainKind::annulus ? params_[1] : params_[0]; }

    bool contains(const Point& x) const
    {
        check_dim(x);
        const double tol = 1e-12 * extent();
        switch (kind_) {
        case DomainKind::square: return x.cwiseAbs().maxCoeff() <= params_[0] + tol;
        case DomainKind::disk: return x.norm() <= params_[0] + tol;
        case DomainKind::annulus: {
            const double r = x.norm();
            return r >= params_[0] - tol && r <= params_[1] + tol;
        }
        }
        return false;
    }

    /// Largest distance from the boundary attained inside the domain.
    double inradius() const
    {
        switch (kind_) {
        case DomainKind::square:
        case DomainKind::disk: return params_[0];
        case DomainKind::annulus: return 0.5 * (params_[1] - params_[0]);
        }
        return 0.0;
    }

    double boundary_distance(const Point& x) const
    {
        if (!contains(x)) throw ValidationError("boundary_distance: point lies outside the domain");
        double d = 0.0;
        switch (kind_) {
        case DomainKind::square: d = params_[0] - x.cwiseAbs().maxCoeff(); break;
        case DomainKind::disk: d = params_[0] - x.norm(); break;
        case DomainKind::annulus: {
            const double r = x.norm();
            d = std::min(r - params_[0], params_[1] - r);
            break;
        }
        }
        return std::max(d, 0.0);
    }

    /// Distance from an interior point to the boundary when walking along
    /// +/- the given coordinate axis. Infinite if the ray never leaves.
    double axis_exit_distance(const Point& x, int axis, int sign) const
    {
        check_dim(x);
        const double s = sign >= 0 ? 1.0 : -1.0;
        switch (kind_) {
        case DomainKind::square: return std::max(params_[0] - s * x[axis], 0.0);
        case DomainKind::disk: return sphere_exit(x, axis, s, params_[0]);
        case DomainKind::annulus: {
            const double outer = sphere_exit(x, axis, s, params_[1]);
            const double inner = sphere_entry(x, axis, s, params_[0]);
            return std::min(outer, inner);
        }
        }
        return std::numeric_limits<double>::infinity();
    }

    bool operator==(const Domain&) const = default;

private:
    void check_dim(const Point& x) const
    {
        if (x.size() != dim_)
            throw ValidationError("dimension mismatch: point has " + std::to_string(x.size()) +
                                  " coordinates, domain has " + std::to_string(dim_));
    }

    // largest root t of |x + t s e_k| = R (x inside the sphere)
    static double sphere_exit(const Point& x, int axis, double s, double radius)
    {
        const double b = s * x[axis];
        const double c = x.squaredNorm() - radius * radius;
        const double disc = std::max(b * b - c, 0.0);
        return std::max(-b + std::sqrt(disc), 0.0);
    }

    // smallest positive root t of |x + t s e_k| = r (x outside the sphere), inf if missed
    static double sphere_entry(const Point& x, int axis, double s, double radius)
    {
        const double b = s * x[axis];
        const double c = x.squaredNorm() - radius * radius;
        const double disc = b * b - c;
        if (disc < 0.0) return std::numeric_limits<double>::infinity();
        const double t = -b - std::sqrt(disc);
        return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
    }

    DomainKind kind_;
    std::vector<double> params_;
    int dim_;
};

inline bool contains(const Domain& domain, const Point& x) { return domain.contains(x); }
inline double boundary_distance(const Domain& domain, const Point& x) { return domain.boundary_distance(x); }

/// Measurement sites. Interior sites come first, the last `boundary_count`
/// rows lie on the boundary.
struct SiteSet {
    PointMatrix points;
    int boundary_count = 0;

    int size() const { return static_cast<int>(points.rows()); }
    int interior_count() const { return size() - boundary_count; }
    int dim() const { return static_cast<int>(points.cols()); }
    bool is_boundary(int i) const { return i >= interior_count(); }
    Point point(int i) const { return points.row(i).transpose(); }
    PointMatrix interior() const { return points.topRows(interior_count()); }
};

struct EvalGrid {
    PointMatrix points;
    int resolution = 0;

    int size() const { return static_cast<int>(points.rows()); }
};

/// Checks every SiteSet invariant; returns a description of the first violation.
inline std::optional<std::string> check_site_set(const Domain& domain, const SiteSet& sites)
{
    if (sites.dim() != domain.dim()) return "site dimension differs from domain dimension";
    if (sites.boundary_count < 0 || sites.boundary_count > sites.size()) return "boundary count out of range";
    for (int i = 0; i < sites.size(); ++i) {
        const Point x = sites.point(i);
        if (!domain.contains(x)) return "site " + std::to_string(i) + " lies outside the domain";
        const bool on_boundary = domain.boundary_distance(x) <= boundary_tolerance;
        if (on_boundary != sites.is_boundary(i))
            return "site " + std::to_string(i) + (on_boundary ? " is on the boundary but listed as interior"
                                                              : " is listed as boundary but lies inside");
        for (int j = 0; j < i; ++j)
            if ((sites.points.row(i) - sites.points.row(j)).norm() == 0.0)
                return "sites " + std::to_string(j) + " and " + std::to_string(i) + " coincide";
    }
    return std::nullopt;
}

/// Uniform sample of the domain's interior by rejection from the bounding box.
inline PointMatrix sample_interior(const Domain& domain, int count, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> coord(-domain.extent(), domain.extent());
    PointMatrix out(count, domain.dim());
    Point x(domain.dim());
    for (int filled = 0; filled < count;) {
        for (int k = 0; k < domain.dim(); ++k) x[k] = coord(rng);
        if (domain.contains(x) && domain.boundary_distance(x) > boundary_tolerance) out.row(filled++) = x.transpose();
    }
    return out;
}

/// Points equispaced in arc length along the boundary (2D only).
inline PointMatrix boundary_points(const Domain& domain, int count)
{
    PointMatrix out(count, domain.dim());
    if (count == 0) return out;
    detail::require(domain.dim() == 2, "boundary site placement is only available in two dimensions");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto circle = [&](int offset, int n, double radius) {
        for (int i = 0; i < n; ++i) {
            const double a = two_pi * i / n;
            out(offset + i, 0) = radius * std::cos(a);
            out(offset + i, 1) = radius * std::sin(a);
        }
    };
    switch (domain.kind()) {
    case DomainKind::square: {
        // counter-clockwise from the lower-left corner
        const double a = domain.params()[0];
        const double side = 2.0 * a;
        for (int i = 0; i < count; ++i) {
            const double s = 4.0 * side * i / count;
            const int edge = std::min(static_cast<int>(s / side), 3);
            const double u = s - edge * side;
            double px = 0.0, py = 0.0;
            switch (edge) {
            case 0: px = -a + u; py = -a; break;
            case 1: px = a; py = -a + u; break;
            case 2: px = a - u; py = a; break;
            default: px = -a; py = a - u; break;
            }
            out(i, 0) = px;
            out(i, 1) = py;
        }
        break;
    }
    case DomainKind::disk: circle(0, count, domain.params()[0]); break;
    case DomainKind::annulus: {
        const double r = domain.params()[0], R = domain.params()[1];
        const int outer = static_cast<int>(std::lround(count * R / (r + R)));
        circle(0, outer, R);
        circle(outer, count - outer, r);
        break;
    }
    }
    return out;
}

/// Interior sites are K-means centres of a uniform sample of 200*k points
/// (at least `min_site_sample`); boundary sites are equispaced along the boundary.
inline SiteSet select_sites(const Domain& domain, int n_interior, int n_boundary, std::uint64_t seed)
{
    detail::require(n_interior >= 1, "select_sites: at least one interior site is required");
    detail::require(n_boundary >= 0, "select_sites: negative boundary count");
    std::mt19937_64 rng(seed);
    const PointMatrix sample = sample_interior(domain, std::max(200 * n_interior, min_site_sample), rng);
    KMeansResult km = kmeans(sample, n_interior, rng);

    // centroids of clusters wrapping a hole may fall outside; use the nearest member instead
    for (int c = 0; c < n_interior; ++c) {
        const Point x = km.centers.row(c).transpose();
        if (domain.contains(x) && domain.boundary_distance(x) > boundary_tolerance) continue;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index s = 0; s < sample.rows(); ++s) {
            if (km.assignment[s] != c) continue;
            const double dist = (sample.row(s) - km.centers.row(c)).squaredNorm();
            if (dist < best) {
                best = dist;
                km.centers.row(c) = sample.row(s);
            }
        }
    }

    SiteSet sites;
    sites.boundary_count = n_boundary;
    sites.points.resize(n_interior + n_boundary, domain.dim());
    sites.points.topRows(n_interior) = km.centers;
    sites.points.bottomRows(n_boundary) = boundary_points(domain, n_boundary);
    return sites;
}

/// Regular lattice over the bounding box, masked by domain membership.
inline EvalGrid eval_grid(const Domain& domain, int resolution)
{
    detail::require(resolution >= 2, "eval_grid: resolution must be at least 2");
    detail::require(domain.dim() == 2, "eval_grid: only two-dimensional domains are supported");
    const double e = domain.extent();
    std::vector<Point> kept;
    Point x(2);
    for (int j = 0; j < resolution; ++j) {
        for (int i = 0; i < resolution; ++i) {
            x << -e + 2.0 * e * i / (resolution - 1), -e + 2.0 * e * j / (resolution - 1);
            if (domain.contains(x)) kept.push_back(x);
        }
    }
    EvalGrid grid;
    grid.resolution = resolution;
    grid.points.resize(static_cast<Eigen::Index>(kept.size()), 2);
    for (std::size_t k = 0; k < kept.size(); ++k) grid.points.row(static_cast<Eigen::Index>(k)) = kept[k].transpose();
    return grid;
}

} // namespace drbf
