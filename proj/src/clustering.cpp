#include "sesar/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sesar/errors.hpp"
#include "sesar/rng.hpp"

namespace sesar {

std::vector<std::vector<int>> ClusterModel::members() const {
    std::vector<std::vector<int>> out(num_clusters());
    for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
        out[assignment[i]].push_back(i);
    return out;
}

namespace {

// Nearest centroid, ties to the lowest centroid index.
int nearest(const Matrix& latents, int i, const Matrix& centroids, double* d2_out) {
    int best = 0;
    double best_d2 = squared_distance(latents.row_ptr(i), centroids.row_ptr(0), latents.cols);
    for (int m = 1; m < centroids.rows; ++m) {
        const double d2 = squared_distance(latents.row_ptr(i), centroids.row_ptr(m), latents.cols);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = m;
        }
    }
    if (d2_out) *d2_out = best_d2;
    return best;
}

ClusterModel lloyd(const Matrix& latents, Matrix centroids, ExecPolicy policy, int max_iter) {
    const int n = latents.rows;
    const int M = centroids.rows;
    const int dim = latents.cols;

    ClusterModel cm;
    cm.assignment.assign(n, -1);
    cm.distance.assign(n, 0.0);
    Vec d2(n, 0.0);
    std::vector<int> prev;

    for (int iter = 0; iter < max_iter; ++iter) {
        parallel_for(n, policy, [&](int i) {
            cm.assignment[i] = nearest(latents, i, centroids, &d2[i]);
        });
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) inertia += d2[i];
        cm.inertia_trace.push_back(inertia);
        cm.iterations = iter + 1;
        if (cm.assignment == prev) break;
        prev = cm.assignment;
        if (iter + 1 == max_iter) break;

        // Update step, serial in fixed order so reruns are bit-identical.
        Matrix sums(M, dim);
        std::vector<long> counts(M, 0);
        for (int i = 0; i < n; ++i) {
            const int c = cm.assignment[i];
            ++counts[c];
            const double* row = latents.row_ptr(i);
            double* acc = sums.row_ptr(c);
            for (int j = 0; j < dim; ++j) acc[j] += row[j];
        }
        std::set<int> reseeded;
        for (int c = 0; c < M; ++c) {
            if (counts[c] > 0) {
                for (int j = 0; j < dim; ++j)
                    centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
            } else {
                // Reseed an empty cluster to the sample farthest from its
                // stale centroid; each empty cluster takes a distinct sample.
                int far = -1;
                double far_d2 = -1.0;
                for (int i = 0; i < n; ++i) {
                    if (reseeded.count(i)) continue;
                    const double d = squared_distance(latents.row_ptr(i), centroids.row_ptr(c), dim);
                    if (d > far_d2) {
                        far_d2 = d;
                        far = i;
                    }
                }
                if (far >= 0) {
                    for (int j = 0; j < dim; ++j) centroids(c, j) = latents(far, j);
                    reseeded.insert(far);
                }
            }
        }
    }

    for (int i = 0; i < n; ++i) cm.distance[i] = std::sqrt(d2[i]);
    cm.inertia = cm.inertia_trace.back();
    cm.centroids = std::move(centroids);
    return cm;
}

}  // namespace

ClusterModel kmeans_fit(const Matrix& latents, int clusters, uint64_t seed,
                        ExecPolicy policy, int max_iter) {
    const int n = latents.rows;
    if (clusters < 1 || clusters > n)
        throw ConfigError("cluster count must be in [1, n]");
    if (!all_finite(latents.data)) throw DataError("non-finite latents");

    // k-means++ seeding.
    Rng rng(derive_seed(seed, 0x6b6d6570));
    Matrix centroids(clusters, latents.cols);
    int first = rng.uniform_int(n);
    for (int j = 0; j < latents.cols; ++j) centroids(0, j) = latents(first, j);

    Vec min_d2(n);
    parallel_for(n, policy, [&](int i) {
        min_d2[i] = squared_distance(latents.row_ptr(i), centroids.row_ptr(0), latents.cols);
    });
    for (int m = 1; m < clusters; ++m) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += min_d2[i];
        int pick;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                cum += min_d2[i];
                if (r < cum) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(n);  // all points coincide with chosen seeds
        }
        for (int j = 0; j < latents.cols; ++j) centroids(m, j) = latents(pick, j);
        parallel_for(n, policy, [&](int i) {
            const double d = squared_distance(latents.row_ptr(i), centroids.row_ptr(m), latents.cols);
            if (d < min_d2[i]) min_d2[i] = d;
        });
    }

    return lloyd(latents, std::move(centroids), policy, max_iter);
}

ClusterModel kmeans_fit_init(const Matrix& latents, const Matrix& init_centroids,
                             ExecPolicy policy, int max_iter) {
    if (init_centroids.rows < 1 || init_centroids.rows > latents.rows)
        throw ConfigError("cluster count must be in [1, n]");
    if (init_centroids.cols != latents.cols)
        throw ConfigError("centroid dimension mismatch");
    if (!all_finite(latents.data)) throw DataError("non-finite latents");
    return lloyd(latents, init_centroids, policy, max_iter);
}

long ClusterBudgets::sum() const {
    return std::accumulate(per_cluster.begin(), per_cluster.end(), 0L);
}

ClusterBudgets budgets(const ClusterModel& cm, const LabelPool& pool, double percentage) {
    if (percentage <= 0.0 || percentage > 1.0)
        throw ConfigError("sample percentage must be in (0, 1]");
    if (pool.unlabeled.empty()) throw DataError("no unlabeled samples to budget");

    const int M = cm.num_clusters();
    const int n = static_cast<int>(cm.assignment.size());
    std::vector<long> full_count(M, 0), unlabeled_count(M, 0);
    for (int i = 0; i < n; ++i) ++full_count[cm.assignment[i]];
    for (int i : pool.unlabeled) ++unlabeled_count[cm.assignment[i]];

    const long target = std::llround(percentage * n);
    long B = std::max(0L, target - static_cast<long>(pool.labeled.size()));
    B = std::min(B, static_cast<long>(pool.unlabeled.size()));

    ClusterBudgets out;
    out.total = B;
    out.per_cluster.assign(M, 0);

    std::vector<double> frac(M);
    long assigned = 0;
    for (int c = 0; c < M; ++c) {
        const double raw = percentage * static_cast<double>(full_count[c]);
        out.per_cluster[c] = static_cast<long>(std::floor(raw));
        frac[c] = raw - std::floor(raw);
        assigned += out.per_cluster[c];
    }

    // Largest fractional part first, ties to the lowest cluster index.
    std::vector<int> by_frac_desc(M), by_frac_asc(M);
    std::iota(by_frac_desc.begin(), by_frac_desc.end(), 0);
    by_frac_asc = by_frac_desc;
    std::stable_sort(by_frac_desc.begin(), by_frac_desc.end(),
                     [&](int a, int b) { return frac[a] > frac[b]; });
    std::stable_sort(by_frac_asc.begin(), by_frac_asc.end(),
                     [&](int a, int b) { return frac[a] < frac[b]; });

    long remaining = B - assigned;
    while (remaining > 0) {
        for (int c : by_frac_desc) {
            if (remaining == 0) break;
            ++out.per_cluster[c];
            --remaining;
        }
    }
    // The cumulative percentage can floor to more than this round's budget on
    // later rounds; take back from the smallest remainders.
    while (remaining < 0) {
        for (int c : by_frac_asc) {
            if (remaining == 0) break;
            if (out.per_cluster[c] > 0) {
                --out.per_cluster[c];
                ++remaining;
            }
        }
    }

    // Clamp to each cluster's unlabeled membership and push the surplus back
    // out by the same largest-remainder order.
    long surplus = 0;
    for (int c = 0; c < M; ++c) {
        if (out.per_cluster[c] > unlabeled_count[c]) {
            surplus += out.per_cluster[c] - unlabeled_count[c];
            out.per_cluster[c] = unlabeled_count[c];
        }
    }
    while (surplus > 0) {
        bool moved = false;
        for (int c : by_frac_desc) {
            if (surplus == 0) break;
            if (out.per_cluster[c] < unlabeled_count[c]) {
                ++out.per_cluster[c];
                --surplus;
                moved = true;
            }
        }
        if (!moved) break;  // unreachable while B <= |X_u|
    }
    return out;
}

}  // namespace sesar
