#pragma once

// Independent reference implementations used as test oracles. These are
// written straight-line from first principles and deliberately avoid the
// library's own measure and selection code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "sesar/clustering.hpp"
#include "sesar/dataset.hpp"
#include "sesar/matrix.hpp"
#include "sesar/rng.hpp"
#include "sesar/selection.hpp"

namespace oracles {

inline double js_ref(const sesar::Vec& p, const sesar::Vec& q) {
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double z = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) s += 0.5 * p[i] * std::log(p[i] / z);
        if (q[i] > 0.0) s += 0.5 * q[i] * std::log(q[i] / z);
    }
    return s;
}

inline double entropy_ref(const sesar::Vec& p) {
    double s = 0.0;
    for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

inline double vr_ref(const sesar::Vec& p) {
    return 1.0 - *std::max_element(p.begin(), p.end());
}

// Cluster-wise selection transcribed line by line: per cluster, either the
// distance-ascending prefix (no labeled members) or the top-uncertainty
// subset of the 2*n most dissimilar unlabeled members.
inline std::vector<int> kjs_reference(const sesar::ClusterModel& cm,
                                      const sesar::ClusterBudgets& bgts,
                                      const sesar::LabelPool& pool,
                                      const sesar::Matrix& probs,
                                      sesar::UncertaintyKind kind) {
    std::vector<int> selected;
    const int n = static_cast<int>(cm.assignment.size());
    for (int c = 0; c < cm.num_clusters(); ++c) {
        const long quota = bgts.per_cluster[c];
        if (quota == 0) continue;
        std::vector<int> labeled_in, unlabeled_in;
        for (int i = 0; i < n; ++i) {
            if (cm.assignment[i] != c) continue;
            (pool.is_labeled(i) ? labeled_in : unlabeled_in).push_back(i);
        }

        std::vector<int> ranked;
        if (labeled_in.empty()) {
            ranked = unlabeled_in;
            std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
                if (cm.distance[a] != cm.distance[b]) return cm.distance[a] < cm.distance[b];
                return a < b;
            });
        } else {
            std::vector<std::pair<double, int>> by_sim;
            for (int u : unlabeled_in) {
                double best = 1e300;
                for (int l : labeled_in)
                    best = std::min(best, js_ref(probs.row(l), probs.row(u)));
                by_sim.push_back({best, u});
            }
            std::sort(by_sim.begin(), by_sim.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            const size_t keep = std::min<size_t>(2 * quota, by_sim.size());
            std::vector<std::pair<double, int>> by_unc;
            for (size_t k = 0; k < keep; ++k) {
                const sesar::Vec p = probs.row(by_sim[k].second);
                by_unc.push_back({kind == sesar::UncertaintyKind::Entropy ? entropy_ref(p)
                                                                          : vr_ref(p),
                                  by_sim[k].second});
            }
            // equal uncertainty keeps the dissimilarity-descending order
            std::stable_sort(by_unc.begin(), by_unc.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            for (const auto& [u, idx] : by_unc) ranked.push_back(idx);
        }
        for (long k = 0; k < quota && k < static_cast<long>(ranked.size()); ++k)
            selected.push_back(ranked[k]);
    }
    return selected;
}

// Exhaustive k-center: minimal covering radius over every k-subset of the
// points, centers restricted to the points themselves.
inline double optimal_kcenter_radius(const sesar::Matrix& pts, int k) {
    const int n = pts.rows;
    std::vector<int> subset(k);
    std::vector<int> best_subset;
    double best = 1e300;

    std::function<void(int, int)> recurse = [&](int start, int depth) {
        if (depth == k) {
            double radius = 0.0;
            for (int i = 0; i < n; ++i) {
                double mind = 1e300;
                for (int c : subset)
                    mind = std::min(mind, sesar::squared_distance(pts.row_ptr(i),
                                                                  pts.row_ptr(c), pts.cols));
                radius = std::max(radius, mind);
            }
            best = std::min(best, radius);
            return;
        }
        for (int i = start; i < n; ++i) {
            subset[depth] = i;
            recurse(i + 1, depth + 1);
        }
    };
    recurse(0, 0);
    return std::sqrt(best);
}

inline double covering_radius(const sesar::Matrix& pts, const std::vector<int>& centers,
                              const std::vector<int>& cover_targets) {
    double radius = 0.0;
    for (int i : cover_targets) {
        double mind = 1e300;
        for (int c : centers)
            mind = std::min(mind, sesar::squared_distance(pts.row_ptr(i), pts.row_ptr(c),
                                                          pts.cols));
        radius = std::max(radius, mind);
    }
    return std::sqrt(radius);
}

// Random instance for the Algorithm-1 fidelity check: clustered latents,
// random class-probability rows, a random labeled subset.
struct KjsInstance {
    sesar::Matrix latents;
    sesar::Matrix probs;
    sesar::LabelPool pool;
    sesar::ClusterModel cm;
    sesar::ClusterBudgets bgts;
    sesar::UncertaintyKind kind;
};

inline KjsInstance random_kjs_instance(uint64_t seed) {
    sesar::Rng rng(seed);
    KjsInstance inst;
    const int n = 5 + rng.uniform_int(46);      // 5..50
    const int C = 2 + rng.uniform_int(3);       // 2..4
    const int M = 1 + rng.uniform_int(std::min(6, n));
    const int dim = 2 + rng.uniform_int(3);

    inst.latents = sesar::Matrix(n, dim);
    for (double& v : inst.latents.data) v = rng.uniform(-2.0, 2.0);
    inst.probs = sesar::Matrix(n, C);
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < C; ++j) {
            inst.probs(i, j) = 1e-6 + rng.uniform();
            sum += inst.probs(i, j);
        }
        for (int j = 0; j < C; ++j) inst.probs(i, j) /= sum;
    }

    for (int i = 0; i < n; ++i) {
        if (rng.uniform() < 0.3 && static_cast<int>(inst.pool.labeled.size()) < n - 1) {
            inst.pool.labeled.push_back(i);
            inst.pool.revealed_labels[i] = rng.uniform_int(C);
        } else {
            inst.pool.unlabeled.push_back(i);
        }
    }

    inst.cm = sesar::kmeans_fit(inst.latents, M, seed ^ 0xabc);
    inst.bgts = sesar::budgets(inst.cm, inst.pool, 0.05 + 0.85 * rng.uniform());
    inst.kind = rng.uniform() < 0.5 ? sesar::UncertaintyKind::Entropy
                                    : sesar::UncertaintyKind::VarianceRatio;
    return inst;
}

}  // namespace oracles
