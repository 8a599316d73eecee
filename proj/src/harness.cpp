#include "sesar/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sesar/clustering.hpp"
#include "sesar/errors.hpp"

namespace sesar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Sub-seed streams hang off the experiment seed; none of them depend on the
// mode or strategy, so runs with the same seed share data, model init, and
// per-round training randomness.
constexpr uint64_t kStreamData = 0x64617461;
constexpr uint64_t kStreamModel = 0x6d6f646c;
constexpr uint64_t kStreamTrain = 0x74720000;
constexpr uint64_t kStreamSelect = 0x73650000;
constexpr uint64_t kStreamKmeans = 0x6b6d0000;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

LossSummary summarize(const TrainTrace& trace) {
    LossSummary s;
    if (trace.loss.empty()) return s;
    s.first = trace.loss.front();
    s.last = trace.loss.back();
    s.mean = std::accumulate(trace.loss.begin(), trace.loss.end(), 0.0) /
             static_cast<double>(trace.loss.size());
    return s;
}

// Top-2 principal components by power iteration on the latent covariance;
// deterministic start vectors and sign convention.
Matrix pca2(const Matrix& X) {
    const int n = X.rows;
    const int d = X.cols;
    Matrix coords(n, 2);
    if (n < 2 || d < 1) return coords;

    Vec mean(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[j] += X(i, j);
    for (double& m : mean) m /= n;

    Matrix cov(d, d);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a) {
            const double va = X(i, a) - mean[a];
            for (int b = 0; b < d; ++b) cov(a, b) += va * (X(i, b) - mean[b]);
        }
    for (double& v : cov.data) v /= (n - 1);

    auto power_iter = [&](const Vec* deflate, double lambda1) {
        Vec v(d, 1.0 / std::sqrt(static_cast<double>(d)));
        for (int it = 0; it < 200; ++it) {
            Vec next(d, 0.0);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) next[a] += cov(a, b) * v[b];
            if (deflate) {
                const double proj = dot(*deflate, v) * lambda1;
                for (int a = 0; a < d; ++a) next[a] -= proj * (*deflate)[a];
            }
            const double norm = std::sqrt(squared_norm(next));
            if (norm == 0.0) break;
            for (double& x : next) x /= norm;
            v = next;
        }
        int peak = 0;
        for (int a = 1; a < d; ++a)
            if (std::fabs(v[a]) > std::fabs(v[peak])) peak = a;
        if (v[peak] < 0.0)
            for (double& x : v) x = -x;
        return v;
    };

    Vec v1 = power_iter(nullptr, 0.0);
    Vec cv(d, 0.0);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) cv[a] += cov(a, b) * v1[b];
    const double lambda1 = dot(v1, cv);
    Vec v2 = power_iter(&v1, lambda1);

    for (int i = 0; i < n; ++i) {
        double c1 = 0.0, c2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double centered = X(i, j) - mean[j];
            c1 += centered * v1[j];
            c2 += centered * v2[j];
        }
        coords(i, 0) = c1;
        coords(i, 1) = c2;
    }
    return coords;
}

}  // namespace

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::C: return "c";
        case Mode::RC: return "rc";
        case Mode::RIC: return "ric";
        case Mode::Sesar: return "sesar";
    }
    return "?";
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Uniform: return "u";
        case Strategy::KT: return "kt";
        case Strategy::KJS: return "kjs";
        case Strategy::CoreSet: return "cs";
        case Strategy::Dis: return "dis";
    }
    return "?";
}

Mode parse_mode(const std::string& s) {
    if (s == "c") return Mode::C;
    if (s == "rc") return Mode::RC;
    if (s == "ric") return Mode::RIC;
    if (s == "sesar") return Mode::Sesar;
    throw ConfigError("unknown mode: " + s);
}

Strategy parse_strategy(const std::string& s) {
    if (s == "u") return Strategy::Uniform;
    if (s == "kt") return Strategy::KT;
    if (s == "kjs") return Strategy::KJS;
    if (s == "cs") return Strategy::CoreSet;
    if (s == "dis") return Strategy::Dis;
    throw ConfigError("unknown strategy: " + s);
}

void ExperimentConfig::validate() const {
    if (!data_path && !synth) throw ConfigError("no data source configured");
    if (data_path && synth) throw ConfigError("configure either a data file or a generator, not both");
    if (schedule.empty()) throw ConfigError("schedule must have at least one entry");
    double prev = 0.0;
    for (double p : schedule) {
        if (p <= prev || p > 1.0)
            throw ConfigError("schedule must be strictly increasing in (0, 1]");
        prev = p;
    }
    if (seeds.empty()) throw ConfigError("at least one seed required");
    if (hidden <= 0 || layers <= 0) throw ConfigError("model sizes must be positive");
    if (train.iterations < 0 || train.batch_size <= 0)
        throw ConfigError("train config counts must be positive");
    if (ric_warmup < 0) throw ConfigError("ric warmup must be non-negative");
    if (clusters < 0) throw ConfigError("cluster count must be non-negative");
}

std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig& cfg,
                                                 uint64_t seed) {
    if (cfg.synth) {
        SynthConfig sc = *cfg.synth;
        const int train_per_class = sc.sequences_per_class;
        sc.sequences_per_class = train_per_class + cfg.synth_test_per_class;
        sc.seed = derive_seed(seed, kStreamData);
        Dataset full = synth_generate(sc);

        Dataset train_ds, test_ds;
        train_ds.num_classes = test_ds.num_classes = full.num_classes;
        train_ds.num_keypoints = test_ds.num_keypoints = full.num_keypoints;
        train_ds.dim = test_ds.dim = full.dim;
        test_ds.split = "test";
        for (int k = 0; k < full.num_classes; ++k)
            for (int s = 0; s < sc.sequences_per_class; ++s) {
                auto& seq = full.sequences[static_cast<size_t>(k) * sc.sequences_per_class + s];
                (s < train_per_class ? train_ds : test_ds).sequences.push_back(std::move(seq));
            }
        return {std::move(train_ds), std::move(test_ds)};
    }

    Dataset train_ds = load_jsonl(*cfg.data_path);
    if (!cfg.test_path) throw ConfigError("test data path required with --data");
    Dataset test_ds = load_jsonl(*cfg.test_path);
    test_ds.split = "test";
    if (test_ds.frame_width() != train_ds.frame_width() ||
        test_ds.num_classes != train_ds.num_classes)
        throw DataError("train/test datasets are incompatible");
    return {std::move(train_ds), std::move(test_ds)};
}

namespace {

struct RoundContext {
    ExperimentConfig cfg;
    uint64_t seed;
    Dataset train_ds, test_ds;
    SesarModel model;
    LabelPool pool;
    ModelConfig mc;
    RunResult result;

    RoundContext(const ExperimentConfig& c, uint64_t s) : cfg(c), seed(s) {
        auto data = load_experiment_data(cfg, seed);
        train_ds = std::move(data.first);
        test_ds = std::move(data.second);
        mc.input_size = train_ds.frame_width();
        mc.num_classes = train_ds.num_classes;
        mc.hidden = cfg.hidden;
        mc.layers = cfg.layers;
        mc.init_seed = derive_seed(seed, kStreamModel);
        model = SesarModel::create(mc);
        pool = LabelPool::all_unlabeled(train_ds.size());
        result.mode = cfg.mode;
        result.strategy = cfg.strategy;
        result.seed = seed;
    }

    long target_labels(double pct) const {
        return std::llround(pct * train_ds.size());
    }

    TrainConfig round_train_config(int round, LossMode mode) const {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(seed, kStreamTrain + static_cast<uint64_t>(round));
        tc.loss_mode = mode;
        return tc;
    }

    // Selection + annotation + training + evaluation for one schedule entry.
    void play_round(int round, double pct, LossMode loss_mode, bool active) {
        const double t0 = now_seconds();
        const long target = target_labels(pct);
        const long budget = std::max(0L, target - static_cast<long>(pool.labeled.size()));
        if (budget > static_cast<long>(pool.unlabeled.size()))
            throw ConfigError("infeasible schedule: budget exceeds unlabeled pool");

        RoundReport report;
        report.round = round;
        report.pct = pct;

        const uint64_t sel_seed = derive_seed(seed, kStreamSelect + static_cast<uint64_t>(round));
        if (active && (cfg.strategy == Strategy::KT || cfg.strategy == Strategy::KJS ||
                       cfg.strategy == Strategy::CoreSet || cfg.strategy == Strategy::Dis)) {
            Matrix latents = encode_all(model, train_ds, cfg.policy);
            switch (cfg.strategy) {
                case Strategy::KT:
                case Strategy::KJS: {
                    const int max_m = std::min(2 * train_ds.num_classes, train_ds.size());
                    const int M = cfg.clusters > 0 ? std::min(cfg.clusters, train_ds.size())
                                                   : max_m;
                    ClusterModel cm = kmeans_fit(
                        latents, M, derive_seed(seed, kStreamKmeans + static_cast<uint64_t>(round)),
                        cfg.policy);
                    ClusterBudgets bgts = budgets(cm, pool, pct);
                    if (cfg.strategy == Strategy::KT) {
                        report.selection = select_kt(cm, bgts, pool);
                    } else {
                        Matrix probs = class_probs(model, latents, cfg.policy);
                        report.selection =
                            select_kjs(cm, bgts, pool, probs, cfg.uncertainty, cfg.policy);
                    }
                    break;
                }
                case Strategy::CoreSet:
                    report.selection = select_coreset(latents, pool, budget, cfg.policy);
                    break;
                case Strategy::Dis:
                    report.selection = select_dis(latents, pool, budget, sel_seed, cfg.policy);
                    break;
                default:
                    break;
            }
            if (cfg.pca_dump) report.pca = pca2(latents);
        } else {
            report.selection = select_uniform(pool, budget, sel_seed);
            if (cfg.pca_dump) report.pca = pca2(encode_all(model, train_ds, cfg.policy));
        }

        pool = oracle_annotate(pool, report.selection.chosen, train_ds);
        pool.validate(train_ds.size());
        if (static_cast<long>(pool.labeled.size()) != target)
            throw std::logic_error("labeled count diverged from schedule target");

        if (cfg.reinit_rounds) {
            model = SesarModel::create(mc);
            model.opt.attach(model.params());
        }
        TrainConfig tc = round_train_config(round, loss_mode);
        if (!(loss_mode == LossMode::ClassifierOnly && pool.labeled.empty()) &&
            tc.iterations > 0) {
            report.loss = summarize(train(model, train_ds, pool, tc));
        }
        EvalResult eval = evaluate(model, test_ds, cfg.policy);
        report.accuracy = eval.accuracy;
        report.confusion = std::move(eval.confusion);
        report.labels = static_cast<long>(pool.labeled.size());
        report.seconds = cfg.measure_wallclock ? now_seconds() - t0 : 0.0;
        result.rounds.push_back(std::move(report));
    }
};

}  // namespace

RunResult run_al(const ExperimentConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (cfg.mode != Mode::Sesar) throw ConfigError("run_al requires mode=sesar");
    RoundContext ctx(cfg, seed);

    // Round 0: reconstruction only. With an empty labeled set the loss
    // dispatch reduces to the reconstruction term on every sample.
    TrainConfig tc0 = ctx.round_train_config(0, LossMode::Full);
    if (tc0.iterations > 0) train(ctx.model, ctx.train_ds, ctx.pool, tc0);

    for (size_t k = 0; k < cfg.schedule.size(); ++k)
        ctx.play_round(static_cast<int>(k) + 1, cfg.schedule[k], LossMode::Full, true);
    return std::move(ctx.result);
}

RunResult run_baseline(const ExperimentConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (cfg.mode == Mode::Sesar) throw ConfigError("run_baseline requires a baseline mode");
    RoundContext ctx(cfg, seed);

    if (cfg.mode == Mode::RIC && cfg.ric_warmup > 0) {
        TrainConfig warm = ctx.round_train_config(0, LossMode::Full);
        warm.iterations = cfg.ric_warmup;
        train(ctx.model, ctx.train_ds, ctx.pool, warm);
    }

    const LossMode mode =
        cfg.mode == Mode::C ? LossMode::ClassifierOnly : LossMode::Full;
    for (size_t k = 0; k < cfg.schedule.size(); ++k)
        ctx.play_round(static_cast<int>(k) + 1, cfg.schedule[k], mode, false);
    return std::move(ctx.result);
}

RunResult run_experiment(const ExperimentConfig& cfg, uint64_t seed) {
    return cfg.mode == Mode::Sesar ? run_al(cfg, seed) : run_baseline(cfg, seed);
}

std::vector<RunResult> run_sweep(const ExperimentConfig& cfg,
                                 const std::vector<Mode>& modes,
                                 const std::vector<Strategy>& strategies) {
    cfg.validate();
    if (modes.empty()) throw ConfigError("sweep needs at least one mode");

    struct Job {
        Mode mode;
        Strategy strategy;
        uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Mode m : modes) {
        if (m == Mode::Sesar) {
            if (strategies.empty()) throw ConfigError("sesar mode needs a strategy");
            for (Strategy s : strategies)
                for (uint64_t seed : cfg.seeds) jobs.push_back({m, s, seed});
        } else {
            for (uint64_t seed : cfg.seeds) jobs.push_back({m, Strategy::Uniform, seed});
        }
    }

    std::vector<RunResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    const int njobs = static_cast<int>(jobs.size());
    parallel_for_dynamic(njobs, cfg.policy, [&](int j) {
        try {
            ExperimentConfig run_cfg = cfg;
            run_cfg.mode = jobs[j].mode;
            run_cfg.strategy = jobs[j].strategy;
            results[j] = run_experiment(run_cfg, jobs[j].seed);
        } catch (...) {
            errors[j] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

namespace {

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

}  // namespace

std::string report_csv(const std::vector<RunResult>& runs) {
    std::vector<const RunResult*> order;
    for (const auto& r : runs) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const RunResult* a, const RunResult* b) {
        if (a->mode != b->mode) return mode_name(a->mode) < mode_name(b->mode);
        if (a->strategy != b->strategy)
            return strategy_name(a->strategy) < strategy_name(b->strategy);
        return a->seed < b->seed;
    });

    std::string csv = "mode,strategy,seed,round,labels,pct,accuracy,seconds\n";
    for (const RunResult* run : order)
        for (const RoundReport& r : run->rounds) {
            csv += mode_name(run->mode) + "," + strategy_name(run->strategy) + "," +
                   std::to_string(run->seed) + "," + std::to_string(r.round) + "," +
                   std::to_string(r.labels) + "," + format_double("%.6g", r.pct) + "," +
                   format_double("%.6f", r.accuracy) + "," +
                   format_double("%.3f", r.seconds) + "\n";
        }
    return csv;
}

void emit_report(const std::vector<RunResult>& runs, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "results.csv", std::ios::binary);
        if (!csv) throw DataError("cannot write results.csv");
        csv << report_csv(runs);
    }

    json bundle;
    bundle["runs"] = json::array();
    for (const RunResult& run : runs) {
        json jr;
        jr["mode"] = mode_name(run.mode);
        jr["strategy"] = strategy_name(run.strategy);
        jr["seed"] = run.seed;
        jr["rounds"] = json::array();
        for (const RoundReport& r : run.rounds) {
            json round;
            round["round"] = r.round;
            round["labels"] = r.labels;
            round["pct"] = r.pct;
            round["accuracy"] = r.accuracy;
            round["seconds"] = r.seconds;
            round["loss"] = {{"first", r.loss.first}, {"last", r.loss.last}, {"mean", r.loss.mean}};
            round["selection"] = json::parse(selection_to_json(r.selection, r.round));
            json conf = json::array();
            for (int a = 0; a < r.confusion.rows; ++a) {
                json row = json::array();
                for (int b = 0; b < r.confusion.cols; ++b) row.push_back(r.confusion(a, b));
                conf.push_back(std::move(row));
            }
            round["confusion"] = std::move(conf);
            jr["rounds"].push_back(std::move(round));
        }
        bundle["runs"].push_back(std::move(jr));
    }
    {
        std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
        if (!out) throw DataError("cannot write report.json");
        out << bundle.dump(2);
    }

    for (const RunResult& run : runs)
        for (const RoundReport& r : run.rounds) {
            if (r.pca.rows == 0) continue;
            const std::string name = "pca_" + mode_name(run.mode) + "_" +
                                     strategy_name(run.strategy) + "_seed" +
                                     std::to_string(run.seed) + "_round" +
                                     std::to_string(r.round) + ".csv";
            std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
            if (!out) throw DataError("cannot write " + name);
            out << "sample_index,pc1,pc2\n";
            for (int i = 0; i < r.pca.rows; ++i)
                out << i << "," << format_double("%.17g", r.pca(i, 0)) << ","
                    << format_double("%.17g", r.pca(i, 1)) << "\n";
        }
}

}  // namespace sesar
