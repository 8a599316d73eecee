#include "sesar/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "sesar/errors.hpp"
#include "sesar/nn.hpp"
#include "sesar/rng.hpp"

namespace sesar {

double kl_divergence(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double js_divergence(const Vec& p1, const Vec& p2) {
    if (p1.size() != p2.size()) throw std::invalid_argument("js: length mismatch");
    Vec mix(p1.size());
    for (size_t i = 0; i < p1.size(); ++i) mix[i] = 0.5 * (p1[i] + p2[i]);
    return 0.5 * kl_divergence(p1, mix) + 0.5 * kl_divergence(p2, mix);
}

double entropy(const Vec& p) {
    double s = 0.0;
    for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

double variance_ratio(const Vec& p) {
    double m = 0.0;
    for (double v : p) m = std::max(m, v);
    return 1.0 - m;
}

double uncertainty(const Vec& p, UncertaintyKind kind) {
    return kind == UncertaintyKind::Entropy ? entropy(p) : variance_ratio(p);
}

namespace {

long clamp_budget(long budget, const LabelPool& pool) {
    if (budget < 0) throw ConfigError("selection budget must be non-negative");
    return std::min(budget, static_cast<long>(pool.unlabeled.size()));
}

}  // namespace

SelectionResult select_uniform(const LabelPool& pool, long budget, uint64_t seed) {
    const long k = clamp_budget(budget, pool);
    SelectionResult res;
    res.strategy = "u";
    Rng rng(derive_seed(seed, 0x756e6966));
    std::vector<int> picks = rng.sample_without_replacement(
        static_cast<int>(pool.unlabeled.size()), static_cast<int>(k));
    for (int p : picks) {
        const int idx = pool.unlabeled[p];
        res.chosen.push_back(idx);
        SelectionResult::Diag d;
        d.index = idx;
        res.diagnostics.push_back(d);
    }
    return res;
}

SelectionResult select_kt(const ClusterModel& cm, const ClusterBudgets& bgts,
                          const LabelPool& pool) {
    SelectionResult res;
    res.strategy = "kt";
    const auto groups = cm.members();
    for (int c = 0; c < cm.num_clusters(); ++c) {
        const long want = bgts.per_cluster[c];
        if (want == 0) continue;
        std::vector<int> candidates;
        for (int i : groups[c])
            if (!pool.is_labeled(i)) candidates.push_back(i);
        std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
            if (cm.distance[a] != cm.distance[b]) return cm.distance[a] < cm.distance[b];
            return a < b;
        });
        for (long k = 0; k < want && k < static_cast<long>(candidates.size()); ++k) {
            const int idx = candidates[k];
            res.chosen.push_back(idx);
            SelectionResult::Diag d;
            d.index = idx;
            d.cluster = c;
            d.distance = cm.distance[idx];
            res.diagnostics.push_back(d);
        }
    }
    return res;
}

SelectionResult select_kjs(const ClusterModel& cm, const ClusterBudgets& bgts,
                           const LabelPool& pool, const Matrix& probs,
                           UncertaintyKind kind, ExecPolicy policy) {
    SelectionResult res;
    res.strategy = "kjs";
    const auto groups = cm.members();
    for (int c = 0; c < cm.num_clusters(); ++c) {
        const long want = bgts.per_cluster[c];
        if (want == 0) continue;

        std::vector<int> labeled_members, unlabeled_members;
        for (int i : groups[c])
            (pool.is_labeled(i) ? labeled_members : unlabeled_members).push_back(i);

        if (labeled_members.empty()) {
            // No annotated sample in this cluster: fall back to the
            // centroid-distance ranking.
            std::sort(unlabeled_members.begin(), unlabeled_members.end(), [&](int a, int b) {
                if (cm.distance[a] != cm.distance[b]) return cm.distance[a] < cm.distance[b];
                return a < b;
            });
            for (long k = 0; k < want && k < static_cast<long>(unlabeled_members.size()); ++k) {
                const int idx = unlabeled_members[k];
                res.chosen.push_back(idx);
                SelectionResult::Diag d;
                d.index = idx;
                d.cluster = c;
                d.distance = cm.distance[idx];
                res.diagnostics.push_back(d);
            }
            continue;
        }

        // Dissimilarity to the closest labeled sample, by JS divergence of
        // the classifier's probability rows.
        const int m = static_cast<int>(unlabeled_members.size());
        Vec sim(m);
        parallel_for(m, policy, [&](int k) {
            const Vec pu = probs.row(unlabeled_members[k]);
            double best = std::numeric_limits<double>::infinity();
            for (int j : labeled_members)
                best = std::min(best, js_divergence(probs.row(j), pu));
            sim[k] = best;
        });

        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (sim[a] != sim[b]) return sim[a] > sim[b];  // most dissimilar first
            return unlabeled_members[a] < unlabeled_members[b];
        });
        const long shortlist = std::min<long>(2 * want, m);

        std::vector<int> pool0(order.begin(), order.begin() + shortlist);
        std::vector<double> unc(pool0.size());
        for (size_t k = 0; k < pool0.size(); ++k)
            unc[k] = uncertainty(probs.row(unlabeled_members[pool0[k]]), kind);
        // Uncertainty ties keep the dissimilarity order of the shortlist.
        std::vector<int> rank(pool0.size());
        std::iota(rank.begin(), rank.end(), 0);
        std::stable_sort(rank.begin(), rank.end(),
                         [&](int a, int b) { return unc[a] > unc[b]; });

        for (long k = 0; k < want && k < static_cast<long>(rank.size()); ++k) {
            const int slot = pool0[rank[k]];
            const int idx = unlabeled_members[slot];
            res.chosen.push_back(idx);
            SelectionResult::Diag d;
            d.index = idx;
            d.cluster = c;
            d.distance = cm.distance[idx];
            d.similarity = sim[slot];
            d.uncertainty = unc[rank[k]];
            res.diagnostics.push_back(d);
        }
    }
    return res;
}

SelectionResult select_coreset(const Matrix& latents, const LabelPool& pool,
                               long budget, ExecPolicy policy) {
    const long k = clamp_budget(budget, pool);
    SelectionResult res;
    res.strategy = "cs";
    if (k == 0) return res;

    const int dim = latents.cols;
    std::vector<int> candidates = pool.unlabeled;
    const int m = static_cast<int>(candidates.size());
    std::vector<char> taken(m, 0);
    Vec min_d2(m, std::numeric_limits<double>::infinity());

    auto absorb_center = [&](int center_index) {
        parallel_for(m, policy, [&](int i) {
            if (taken[i]) return;
            const double d = squared_distance(latents.row_ptr(candidates[i]),
                                              latents.row_ptr(center_index), dim);
            if (d < min_d2[i]) min_d2[i] = d;
        });
    };

    long picked = 0;
    if (pool.labeled.empty()) {
        // No existing centers: seed with the lowest-index unlabeled point.
        taken[0] = 1;
        res.chosen.push_back(candidates[0]);
        SelectionResult::Diag d;
        d.index = candidates[0];
        res.diagnostics.push_back(d);
        absorb_center(candidates[0]);
        ++picked;
    } else {
        for (int j : pool.labeled) absorb_center(j);
    }

    for (; picked < k; ++picked) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < m; ++i) {
            if (taken[i]) continue;
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        taken[best] = 1;
        res.chosen.push_back(candidates[best]);
        SelectionResult::Diag d;
        d.index = candidates[best];
        d.distance = std::sqrt(best_d2);
        res.diagnostics.push_back(d);
        absorb_center(candidates[best]);
    }
    return res;
}

SelectionResult select_dis(const Matrix& latents, const LabelPool& pool, long budget,
                           uint64_t seed, ExecPolicy policy) {
    const long k = clamp_budget(budget, pool);
    if (pool.labeled.empty()) {
        SelectionResult res = select_uniform(pool, k, seed);
        res.strategy = "dis";
        res.uniform_fallback = true;
        return res;
    }

    // One-hidden-layer binary discriminator: labeled -> 1, unlabeled -> 0.
    const int dim = latents.cols;
    const int hidden = 64;
    const long iterations = 500;
    Linear l1("dis.l1", dim, hidden);
    Linear l2("dis.l2", hidden, 1);
    Rng rng(derive_seed(seed, 0x64697363));
    l1.init(rng);
    l2.init(rng);
    std::vector<Param*> params = l1.params();
    for (Param* p : l2.params()) params.push_back(p);
    AdamState opt;
    opt.cfg.base_lr = 1e-3;
    opt.cfg.decay = 1.0;
    opt.attach(params);

    const int n = latents.rows;
    std::vector<double> target(n, 0.0);
    for (int j : pool.labeled) target[j] = 1.0;

    auto predict = [&](int i, Vec* hidden_out) {
        Vec h = linear_apply(l1, latents.row(i));
        for (double& v : h) v = std::tanh(v);
        const double logit = linear_apply(l2, h)[0];
        if (hidden_out) *hidden_out = std::move(h);
        return logit;
    };

    const double inv_n = 1.0 / static_cast<double>(n);
    for (long it = 0; it < iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            Vec h;
            const double logit = predict(i, &h);
            const double p = 1.0 / (1.0 + std::exp(-logit));
            // d BCE / d logit, averaged over the batch
            Vec dlogit = {(p - target[i]) * inv_n};
            Vec dh(hidden, 0.0);
            linear_backward(l2, h, dlogit, dh);
            for (int j = 0; j < hidden; ++j) dh[j] *= 1.0 - h[j] * h[j];
            Vec dx(dim, 0.0);
            linear_backward(l1, latents.row(i), dh, dx);
        }
        adam_step(params, opt);
    }

    const int m = static_cast<int>(pool.unlabeled.size());
    Vec prob_labeled(m);
    parallel_for(m, policy, [&](int i) {
        const double logit = predict(pool.unlabeled[i], nullptr);
        prob_labeled[i] = 1.0 / (1.0 + std::exp(-logit));
    });

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (prob_labeled[a] != prob_labeled[b]) return prob_labeled[a] < prob_labeled[b];
        return pool.unlabeled[a] < pool.unlabeled[b];
    });

    SelectionResult res;
    res.strategy = "dis";
    for (long i = 0; i < k; ++i) {
        const int slot = order[i];
        res.chosen.push_back(pool.unlabeled[slot]);
        SelectionResult::Diag d;
        d.index = pool.unlabeled[slot];
        d.uncertainty = 1.0 - prob_labeled[slot];
        res.diagnostics.push_back(d);
    }
    return res;
}

std::string selection_to_json(const SelectionResult& res, int round) {
    nlohmann::json doc;
    doc["strategy"] = res.strategy;
    doc["round"] = round;
    doc["chosen"] = res.chosen;
    if (res.uniform_fallback) doc["uniform_fallback"] = true;
    nlohmann::json diags = nlohmann::json::array();
    for (const auto& d : res.diagnostics) {
        nlohmann::json j;
        j["index"] = d.index;
        if (d.cluster >= 0) j["cluster"] = d.cluster;
        if (std::isfinite(d.distance)) j["distance"] = d.distance;
        if (std::isfinite(d.similarity)) j["similarity"] = d.similarity;
        if (std::isfinite(d.uncertainty)) j["uncertainty"] = d.uncertainty;
        diags.push_back(std::move(j));
    }
    doc["diagnostics"] = std::move(diags);
    return doc.dump();
}

}  // namespace sesar
