#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sesar/clustering.hpp"
#include "sesar/errors.hpp"
#include "sesar/rng.hpp"
#include "test_util.hpp"

using namespace sesar;

namespace {

Matrix random_points(Rng& rng, int n, int dim, double lo = -1.0, double hi = 1.0) {
    Matrix m(n, dim);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

}  // namespace

TEST_CASE("a single cluster lands on the global mean") {
    Rng rng(3);
    Matrix pts = random_points(rng, 40, 3);
    ClusterModel cm = kmeans_fit(pts, 1, 9);

    Vec mean(3, 0.0);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 3; ++j) mean[j] += pts(i, j) / 40.0;
    for (int j = 0; j < 3; ++j)
        CHECK(cm.centroids(0, j) == doctest::Approx(mean[j]).epsilon(1e-12));

    double inertia = 0.0;
    for (int i = 0; i < 40; ++i)
        inertia += squared_distance(pts.row_ptr(i), mean.data(), 3);
    CHECK(cm.inertia == doctest::Approx(inertia).epsilon(1e-9));
}

TEST_CASE("two well-separated blobs are recovered exactly") {
    Rng rng(5);
    const int per_blob = 25;
    Matrix pts(2 * per_blob, 2);
    for (int i = 0; i < per_blob; ++i) {
        pts(i, 0) = -10.0 + rng.uniform(-0.5, 0.5);
        pts(i, 1) = rng.uniform(-0.5, 0.5);
        pts(per_blob + i, 0) = 10.0 + rng.uniform(-0.5, 0.5);
        pts(per_blob + i, 1) = rng.uniform(-0.5, 0.5);
    }
    for (uint64_t seed = 0; seed < 5; ++seed) {
        ClusterModel cm = kmeans_fit(pts, 2, seed);
        for (int i = 1; i < per_blob; ++i) {
            CHECK(cm.assignment[i] == cm.assignment[0]);
            CHECK(cm.assignment[per_blob + i] == cm.assignment[per_blob]);
        }
        CHECK(cm.assignment[0] != cm.assignment[per_blob]);
    }
}

TEST_CASE("n clusters over n points reach zero inertia") {
    Rng rng(7);
    Matrix pts = random_points(rng, 8, 2);
    ClusterModel cm = kmeans_fit(pts, 8, 1);
    CHECK(cm.inertia == 0.0);
    for (int i = 0; i < 8; ++i) CHECK(cm.distance[i] == 0.0);
}

TEST_CASE("lloyd inertia never increases") {
    for (uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed + 100);
        Matrix pts = random_points(rng, 60, 4);
        ClusterModel cm = kmeans_fit(pts, 5, seed);
        REQUIRE(!cm.inertia_trace.empty());
        for (size_t k = 1; k < cm.inertia_trace.size(); ++k)
            CHECK(cm.inertia_trace[k] <= cm.inertia_trace[k - 1]);
    }
}

TEST_CASE("converged assignments are a nearest-centroid fixed point") {
    Rng rng(11);
    Matrix pts = random_points(rng, 30, 2);
    ClusterModel cm = kmeans_fit(pts, 4, 13);
    for (int i = 0; i < 30; ++i) {
        const double own = cm.distance[i] * cm.distance[i];
        for (int c = 0; c < 4; ++c) {
            const double other = squared_distance(pts.row_ptr(i), cm.centroids.row_ptr(c), 2);
            CHECK(own <= other + 1e-12);
        }
        // ties resolve to the lowest centroid index
        for (int c = 0; c < cm.assignment[i]; ++c) {
            const double other = squared_distance(pts.row_ptr(i), cm.centroids.row_ptr(c), 2);
            CHECK(other > own - 1e-15);
        }
    }
}

TEST_CASE("kmeans is permutation-covariant under fixed initial centroids") {
    Rng rng(17);
    const int n = 20;
    Matrix pts = random_points(rng, n, 3);
    Matrix init(3, 3);
    for (double& v : init.data) v = rng.uniform(-1.0, 1.0);

    ClusterModel base = kmeans_fit_init(pts, init);

    // reverse the rows
    Matrix perm(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) perm(i, j) = pts(n - 1 - i, j);
    ClusterModel permuted = kmeans_fit_init(perm, init);

    for (int i = 0; i < n; ++i) {
        CHECK(permuted.assignment[i] == base.assignment[n - 1 - i]);
        // centroid sums accumulate in row order, so distances agree only to
        // rounding
        CHECK(permuted.distance[i] ==
              doctest::Approx(base.distance[n - 1 - i]).epsilon(1e-9));
    }
}

TEST_CASE("kmeans rejects invalid inputs") {
    Rng rng(19);
    Matrix pts = random_points(rng, 5, 2);
    CHECK_THROWS_AS(kmeans_fit(pts, 6, 1), ConfigError);
    CHECK_THROWS_AS(kmeans_fit(pts, 0, 1), ConfigError);
    pts(2, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(kmeans_fit(pts, 2, 1), DataError);
}

TEST_CASE("empty clusters are reseeded and everything stays assigned") {
    // Duplicated points force k-means++ to choose coincident seeds, making
    // empty clusters likely during the first update.
    Matrix pts(12, 1);
    for (int i = 0; i < 12; ++i) pts(i, 0) = (i < 10) ? 0.0 : 100.0 + i;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        ClusterModel cm = kmeans_fit(pts, 4, seed);
        std::vector<int> counts(4, 0);
        for (int a : cm.assignment) ++counts[a];
        for (size_t k = 1; k < cm.inertia_trace.size(); ++k)
            CHECK(cm.inertia_trace[k] <= cm.inertia_trace[k - 1]);
    }
}

TEST_CASE("budgets: exact division on a single cluster") {
    ClusterModel cm;
    cm.centroids = Matrix(1, 1);
    cm.assignment.assign(100, 0);
    cm.distance.assign(100, 0.0);
    LabelPool pool = LabelPool::all_unlabeled(100);
    ClusterBudgets b = budgets(cm, pool, 0.1);
    CHECK(b.total == 10);
    CHECK(b.per_cluster == std::vector<long>{10});
}

TEST_CASE("budgets: largest remainder breaks the (7,3) case as derived") {
    ClusterModel cm;
    cm.centroids = Matrix(2, 1);
    cm.assignment.assign(10, 0);
    for (int i = 7; i < 10; ++i) cm.assignment[i] = 1;
    cm.distance.assign(10, 0.0);
    LabelPool pool = LabelPool::all_unlabeled(10);
    ClusterBudgets b = budgets(cm, pool, 0.1);
    // raw = (0.7, 0.3), floors (0,0), B = 1 -> largest fraction wins
    CHECK(b.total == 1);
    CHECK(b.per_cluster == std::vector<long>{1, 0});
}

TEST_CASE("budgets: clusters with no unlabeled members get zero") {
    ClusterModel cm;
    cm.centroids = Matrix(2, 1);
    cm.assignment.assign(10, 0);
    for (int i = 5; i < 10; ++i) cm.assignment[i] = 1;
    cm.distance.assign(10, 0.0);

    LabelPool pool;
    for (int i = 0; i < 10; ++i) {
        if (i < 5) {
            pool.labeled.push_back(i);  // cluster 0 fully labeled
            pool.revealed_labels[i] = 0;
        } else {
            pool.unlabeled.push_back(i);
        }
    }
    ClusterBudgets b = budgets(cm, pool, 0.8);
    CHECK(b.per_cluster[0] == 0);
    CHECK(b.per_cluster[1] == b.total);
    CHECK(b.total == std::llround(0.8 * 10) - 5);
}

TEST_CASE("budgets sum to the feasible target on random instances") {
    for (uint64_t seed = 0; seed < 60; ++seed) {
        Rng rng(seed + 500);
        const int n = 10 + rng.uniform_int(80);
        const int M = 1 + rng.uniform_int(8);
        ClusterModel cm;
        cm.centroids = Matrix(M, 1);
        cm.assignment.resize(n);
        for (int i = 0; i < n; ++i) cm.assignment[i] = rng.uniform_int(M);
        cm.distance.assign(n, 0.0);

        LabelPool pool;
        for (int i = 0; i < n; ++i) {
            if (rng.uniform() < 0.4 && static_cast<int>(pool.labeled.size()) < n - 1) {
                pool.labeled.push_back(i);
                pool.revealed_labels[i] = 0;
            } else {
                pool.unlabeled.push_back(i);
            }
        }
        const double pct = 0.05 + 0.95 * rng.uniform();
        ClusterBudgets b = budgets(cm, pool, pct);

        const long target = static_cast<long>(std::llround(pct * n));
        const long expected =
            std::min(std::max(0L, target - static_cast<long>(pool.labeled.size())),
                     static_cast<long>(pool.unlabeled.size()));
        CHECK(b.total == expected);
        CHECK(b.sum() == expected);

        std::vector<long> unlabeled_count(M, 0);
        for (int i : pool.unlabeled) ++unlabeled_count[cm.assignment[i]];
        for (int c = 0; c < M; ++c) {
            CHECK(b.per_cluster[c] >= 0);
            CHECK(b.per_cluster[c] <= unlabeled_count[c]);
        }
    }
}

TEST_CASE("budgets reject degenerate inputs") {
    ClusterModel cm;
    cm.centroids = Matrix(1, 1);
    cm.assignment.assign(4, 0);
    cm.distance.assign(4, 0.0);
    LabelPool pool = LabelPool::all_unlabeled(4);
    CHECK_THROWS_AS(budgets(cm, pool, 0.0), ConfigError);
    CHECK_THROWS_AS(budgets(cm, pool, 1.5), ConfigError);

    LabelPool exhausted;
    for (int i = 0; i < 4; ++i) {
        exhausted.labeled.push_back(i);
        exhausted.revealed_labels[i] = 0;
    }
    CHECK_THROWS_AS(budgets(cm, exhausted, 0.5), DataError);
}
