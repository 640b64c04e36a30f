#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drbf/geometry.hpp"
#include "drbf/kmeans.hpp"

using namespace drbf;

namespace {

Point pt(double x, double y)
{
    Point p(2);
    p << x, y;
    return p;
}

double objective(const PointMatrix& samples, const PointMatrix& centers)
{
    double total = 0.0;
    for (Eigen::Index s = 0; s < samples.rows(); ++s)
        total += (centers.rowwise() - samples.row(s)).rowwise().squaredNorm().minCoeff();
    return total;
}

} // namespace

TEST(Domain, Membership)
{
    EXPECT_TRUE(contains(Domain::square(1.0), pt(0, 0)));
    EXPECT_FALSE(contains(Domain::disk(1.0), pt(2, 0)));
    EXPECT_FALSE(contains(Domain::annulus(0.3, 1.0), pt(0, 0)));
    EXPECT_TRUE(contains(Domain::annulus(0.3, 1.0), pt(0.3, 0)));
    EXPECT_TRUE(contains(Domain::square(1.0), pt(1, -1)));
}

TEST(Domain, MembershipRejectsWrongDimension)
{
    Point p3(3);
    p3 << 0, 0, 0;
    EXPECT_THROW(contains(Domain::square(1.0), p3), ValidationError);
}

TEST(Domain, InvalidParametersAreRejected)
{
    EXPECT_THROW(Domain::annulus(1.0, 0.5), ValidationError);
    EXPECT_THROW(Domain::annulus(1.0, 1.0), ValidationError);
    EXPECT_THROW(Domain::disk(0.0), ValidationError);
    EXPECT_THROW(Domain::square(-1.0), ValidationError);
}

TEST(Domain, InradiusIsLargestBoundaryDistance)
{
    EXPECT_DOUBLE_EQ(Domain::square(1.5).inradius(), 1.5);
    EXPECT_DOUBLE_EQ(Domain::disk(2.0).inradius(), 2.0);
    EXPECT_DOUBLE_EQ(Domain::annulus(0.5, 1.0).inradius(), 0.25);
    EXPECT_DOUBLE_EQ(boundary_distance(Domain::annulus(0.5, 1.0), pt(0, 0.75)), 0.25);
}

TEST(Domain, BoundaryDistance)
{
    EXPECT_DOUBLE_EQ(boundary_distance(Domain::square(1.0), pt(1, 0.5)), 0.0);
    EXPECT_DOUBLE_EQ(boundary_distance(Domain::square(1.0), pt(0, 0)), 1.0);
    EXPECT_DOUBLE_EQ(boundary_distance(Domain::disk(1.0), pt(0.5, 0)), 0.5);
    EXPECT_NEAR(boundary_distance(Domain::annulus(0.3, 1.0), pt(0.5, 0)), 0.2, 1e-15);
    EXPECT_THROW(boundary_distance(Domain::disk(1.0), pt(2, 0)), ValidationError);
}

TEST(Domain, BoundaryPointsHaveZeroDistance)
{
    for (const Domain& d : {Domain::square(1.0), Domain::disk(0.8), Domain::annulus(0.4, 1.0)}) {
        const PointMatrix b = boundary_points(d, 23);
        for (Eigen::Index i = 0; i < b.rows(); ++i) {
            const Point x = b.row(i).transpose();
            ASSERT_TRUE(d.contains(x));
            EXPECT_LE(d.boundary_distance(x), boundary_tolerance);
        }
    }
}

TEST(Domain, AnnulusSplitsBoundarySitesByPerimeter)
{
    const Domain d = Domain::annulus(0.5, 1.0);
    const PointMatrix b = boundary_points(d, 30);
    int outer = 0;
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        if (std::abs(b.row(i).norm() - 1.0) < 1e-12) ++outer;
    EXPECT_EQ(outer, 20);
}

TEST(Domain, SquareBoundarySitesAreEquispaced)
{
    const PointMatrix b = boundary_points(Domain::square(1.0), 16);
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
        const Eigen::Index j = (i + 1) % b.rows();
        const double dx = std::abs(b(i, 0) - b(j, 0)) + std::abs(b(i, 1) - b(j, 1));
        EXPECT_NEAR(dx, 0.5, 1e-12);
    }
}

TEST(KMeans, EveryPointItsOwnCluster)
{
    std::mt19937_64 rng(4);
    const PointMatrix samples = sample_interior(Domain::square(1.0), 12, rng);
    const KMeansResult r = kmeans(samples, 12, rng);
    for (Eigen::Index s = 0; s < samples.rows(); ++s)
        EXPECT_DOUBLE_EQ((r.centers.rowwise() - samples.row(s)).rowwise().squaredNorm().minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(r.objective.back(), 0.0);
}

TEST(KMeans, ObjectiveIsNonIncreasing)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        const PointMatrix samples = sample_interior(Domain::annulus(0.3, 1.0), 2000, rng);
        const KMeansResult r = kmeans(samples, 15, rng);
        ASSERT_GE(r.objective.size(), 2u);
        for (std::size_t i = 1; i < r.objective.size(); ++i)
            EXPECT_LE(r.objective[i], r.objective[i - 1] * (1.0 + 1e-12)) << "seed " << seed << " pass " << i;
        EXPECT_NEAR(r.objective.back(), objective(samples, r.centers), 1e-9 * r.objective.back());
    }
}

TEST(SelectSites, SingleSiteNearCentreOfSquare)
{
    const SiteSet s = select_sites(Domain::square(1.0), 1, 0, 7);
    EXPECT_LT(s.point(0).norm(), 0.05);
}

TEST(SelectSites, DeterministicForSeed)
{
    const SiteSet a = select_sites(Domain::disk(1.0), 20, 8, 42);
    const SiteSet b = select_sites(Domain::disk(1.0), 20, 8, 42);
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.boundary_count, b.boundary_count);
}

TEST(SelectSites, InvariantsHoldForAllDomainsAndSeeds)
{
    for (const Domain& d : {Domain::square(1.0), Domain::disk(1.0), Domain::annulus(0.5, 1.0)}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SiteSet s = select_sites(d, 30, 12, seed);
            ASSERT_EQ(s.size(), 42);
            ASSERT_EQ(s.boundary_count, 12);
            const auto err = check_site_set(d, s);
            EXPECT_FALSE(err.has_value()) << to_string(d.kind()) << " seed " << seed << ": " << err.value_or("");
        }
    }
}

TEST(SelectSites, RejectsZeroInterior)
{
    EXPECT_THROW(select_sites(Domain::square(1.0), 0, 4, 1), ValidationError);
}

TEST(CheckSiteSet, DetectsViolations)
{
    SiteSet s;
    s.points.resize(3, 2);
    s.points << 0, 0, 0.5, 0, 1, 0;
    s.boundary_count = 1;
    EXPECT_FALSE(check_site_set(Domain::square(1.0), s).has_value());
    s.boundary_count = 0;
    EXPECT_TRUE(check_site_set(Domain::square(1.0), s).has_value());
    s.boundary_count = 1;
    s.points.row(1) = s.points.row(0);
    EXPECT_TRUE(check_site_set(Domain::square(1.0), s).has_value());
    s.points.row(1) << 2, 0;
    EXPECT_TRUE(check_site_set(Domain::square(1.0), s).has_value());
}

TEST(EvalGrid, MaskedLatticeCounts)
{
    EXPECT_EQ(eval_grid(Domain::square(1.0), 3).size(), 9);
    EXPECT_EQ(eval_grid(Domain::disk(1.0), 3).size(), 5);
    EXPECT_EQ(eval_grid(Domain::annulus(0.3, 1.0), 3).size(), 4);
    EXPECT_THROW(eval_grid(Domain::square(1.0), 1), ValidationError);
}

TEST(EvalGrid, PointsLieInDomain)
{
    const Domain d = Domain::annulus(0.5, 1.0);
    const EvalGrid g = eval_grid(d, 25);
    for (int i = 0; i < g.size(); ++i) EXPECT_TRUE(d.contains(g.points.row(i).transpose()));
}
