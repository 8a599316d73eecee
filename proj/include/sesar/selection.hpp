#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sesar/clustering.hpp"
#include "sesar/dataset.hpp"
#include "sesar/matrix.hpp"
#include "sesar/parallel.hpp"

namespace sesar {

enum class UncertaintyKind { Entropy, VarianceRatio };

/// sum p*ln(p/q) with 0*ln(0/.) == 0. Natural log throughout the project.
double kl_divergence(const Vec& p, const Vec& q);

/// Jensen-Shannon divergence against the even mixture; bounded by ln 2.
double js_divergence(const Vec& p1, const Vec& p2);

/// -sum p*ln(p), in [0, ln C].
double entropy(const Vec& p);

/// 1 - max_j p_j, in [0, 1 - 1/C]; like entropy, larger = more uncertain.
double variance_ratio(const Vec& p);

double uncertainty(const Vec& p, UncertaintyKind kind);

/// Indices chosen for annotation (in pick order) plus per-pick diagnostics.
struct SelectionResult {
    struct Diag {
        int index = -1;
        int cluster = -1;
        double distance = std::numeric_limits<double>::quiet_NaN();
        double similarity = std::numeric_limits<double>::quiet_NaN();
        double uncertainty = std::numeric_limits<double>::quiet_NaN();
    };
    std::string strategy;
    std::vector<int> chosen;
    std::vector<Diag> diagnostics;
    bool uniform_fallback = false;
};

/// Seeded uniform sample without replacement from the unlabeled pool.
SelectionResult select_uniform(const LabelPool& pool, long budget, uint64_t seed);

/// Per cluster, the n^c unlabeled members closest to the centroid.
SelectionResult select_kt(const ClusterModel& cm, const ClusterBudgets& bgts,
                          const LabelPool& pool);

/// Cluster-wise selection: clusters without labeled members fall back to the
/// centroid-distance ranking; otherwise the 2*n^c unlabeled members most
/// dissimilar (JS divergence of class probabilities) from the cluster's
/// labeled samples are shortlisted and the n^c most uncertain are taken.
SelectionResult select_kjs(const ClusterModel& cm, const ClusterBudgets& bgts,
                           const LabelPool& pool, const Matrix& probs,
                           UncertaintyKind kind,
                           ExecPolicy policy = ExecPolicy::Serial);

/// Farthest-first (k-center greedy) over Euclidean latent distance with the
/// labeled set as pre-existing centers.
SelectionResult select_coreset(const Matrix& latents, const LabelPool& pool,
                               long budget, ExecPolicy policy = ExecPolicy::Serial);

/// Binary discriminator (one tanh hidden layer, width 64) trained to tell
/// labeled from unlabeled latents for 500 seeded iterations; picks the
/// unlabeled samples with the lowest predicted labeled-probability. Falls
/// back to uniform selection when there is nothing labeled to train on.
SelectionResult select_dis(const Matrix& latents, const LabelPool& pool, long budget,
                           uint64_t seed, ExecPolicy policy = ExecPolicy::Serial);

std::string selection_to_json(const SelectionResult& res, int round);

}  // namespace sesar
