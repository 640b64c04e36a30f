#pragma once

#include <limits>
#include <random>
#include <vector>

#include "drbf/errors.hpp"
#include "drbf/types.hpp"

namespace drbf {

struct KMeansResult {
    PointMatrix centers;
    std::vector<int> assignment;
    /// Sum of squared distances to the assigned centre, recorded after every
    /// assignment pass (index 0 is the seeding).
    std::vector<double> objective;
    int iterations = 0;
};

namespace detail {

inline int nearest_center(const PointMatrix& centers, const auto& x, double& dist2)
{
    int best = 0;
    dist2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = (centers.row(c) - x).squaredNorm();
        if (d < dist2) {
            dist2 = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops when no assignment
/// changes or after `max_iterations` passes. An empty cluster is reseeded at
/// the sample farthest from its current centre.
inline KMeansResult kmeans(const PointMatrix& samples, int k, std::mt19937_64& rng, int max_iterations = 100)
{
    const auto n = samples.rows();
    detail::require(k >= 1, "kmeans: k must be positive");
    detail::require(n >= k, "kmeans: fewer samples than clusters");

    KMeansResult out;
    out.centers.resize(k, samples.cols());

    // k-means++ seeding
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    Eigen::Index pick = first(rng);
    for (int c = 0; c < k; ++c) {
        out.centers.row(c) = samples.row(pick);
        taken[static_cast<std::size_t>(pick)] = 1;
        if (c + 1 == k) break;
        double total = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
            const double d = (samples.row(s) - out.centers.row(c)).squaredNorm();
            auto& cur = d2[static_cast<std::size_t>(s)];
            if (d < cur) cur = d;
            if (taken[static_cast<std::size_t>(s)]) cur = 0.0;
            total += cur;
        }
        if (total <= 0.0) {
            // all remaining samples coincide with chosen centres; take the next untaken one
            for (Eigen::Index s = 0; s < n; ++s)
                if (!taken[static_cast<std::size_t>(s)]) {
                    pick = s;
                    break;
                }
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        pick = n - 1;
        for (Eigen::Index s = 0; s < n; ++s) {
            target -= d2[static_cast<std::size_t>(s)];
            if (target <= 0.0 && d2[static_cast<std::size_t>(s)] > 0.0) {
                pick = s;
                break;
            }
        }
        while (taken[static_cast<std::size_t>(pick)] && pick > 0) --pick;
    }

    out.assignment.assign(static_cast<std::size_t>(n), -1);
    std::vector<double> own_d2(static_cast<std::size_t>(n), 0.0);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        double objective = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
            double dist2 = 0.0;
            const int c = detail::nearest_center(out.centers, samples.row(s), dist2);
            auto& a = out.assignment[static_cast<std::size_t>(s)];
            if (a != c) {
                a = c;
                changed = true;
            }
            own_d2[static_cast<std::size_t>(s)] = dist2;
            objective += dist2;
        }
        out.objective.push_back(objective);
        if (!changed) break;
        out.iterations = it + 1;

        PointMatrix sums = PointMatrix::Zero(k, samples.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index s = 0; s < n; ++s) {
            const int c = out.assignment[static_cast<std::size_t>(s)];
            sums.row(c) += samples.row(s);
            ++counts[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                out.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
                continue;
            }
            Eigen::Index far = 0;
            for (Eigen::Index s = 1; s < n; ++s)
                if (own_d2[static_cast<std::size_t>(s)] > own_d2[static_cast<std::size_t>(far)]) far = s;
            out.centers.row(c) = samples.row(far);
            own_d2[static_cast<std::size_t>(far)] = 0.0;
        }
    }
    return out;
}

} // namespace drbf
