#pragma once

#include <cstdint>
#include <vector>

#include "sesar/dataset.hpp"
#include "sesar/matrix.hpp"
#include "sesar/parallel.hpp"

namespace sesar {

struct ClusterModel {
    Matrix centroids;             // M x latent
    std::vector<int> assignment;  // nearest centroid per sample, ties -> lowest index
    Vec distance;                 // Euclidean distance to the assigned centroid
    double inertia = 0.0;         // sum of squared assigned distances
    std::vector<double> inertia_trace;  // one entry per Lloyd iteration
    int iterations = 0;

    int num_clusters() const { return centroids.rows; }
    std::vector<std::vector<int>> members() const;
};

/// k-means++ seeding (seeded) followed by Lloyd iterations until the
/// assignment reaches a fixed point or max_iter. Empty clusters are reseeded
/// to the sample farthest from their stale centroid.
ClusterModel kmeans_fit(const Matrix& latents, int clusters, uint64_t seed,
                        ExecPolicy policy = ExecPolicy::Serial, int max_iter = 300);

/// Lloyd from explicitly given initial centroids (used by the permutation
/// covariance tests and anywhere a custom seeding is wanted).
ClusterModel kmeans_fit_init(const Matrix& latents, const Matrix& init_centroids,
                             ExecPolicy policy = ExecPolicy::Serial, int max_iter = 300);

struct ClusterBudgets {
    std::vector<long> per_cluster;  // n^c, one per cluster
    long total = 0;                 // B

    long sum() const;
};

/// Largest-remainder split of this round's annotation budget
/// B = round(percentage * n_train) - |X_l| across clusters, proportional to
/// full cluster sizes and clamped to each cluster's unlabeled count.
ClusterBudgets budgets(const ClusterModel& cm, const LabelPool& pool, double percentage);

}  // namespace sesar
