// Command-line front end: synthetic data generation, single experiments,
// multi-seed/strategy sweeps, and the gradient checker.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sesar/errors.hpp"
#include "sesar/harness.hpp"
#include "sesar/model.hpp"

namespace {

using namespace sesar;

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_schedule(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_csv(s)) out.push_back(std::stod(tok));
    return out;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> out;
    for (const auto& tok : split_csv(s)) out.push_back(std::stoull(tok));
    return out;
}

struct CommonArgs {
    std::string data, test, schedule = "0.05,0.10,0.20", seeds = "1";
    std::string mode = "sesar", strategy = "kt", uncertainty = "ep";
    int synth_classes = 0, synth_per_class = 100, synth_frames = 16,
        synth_keypoints = 5, synth_dim = 2, synth_test_per_class = 40;
    double synth_noise = 0.5;
    uint64_t synth_seed_unused = 0;
    int clusters = 0, hidden = 64, layers = 2, batch = 32, threads = 0;
    long iters = 2000, decay_interval = 1000, ric_warmup = 2000;
    double lr = 1e-4, decay = 0.95, weight_re = 1.0, weight_cla = 1.0;
    bool freeze_decoder = false, reinit_rounds = false, timing = false, pca = false,
         serial = false;
    std::string out = "out";
};

void add_common_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--data", a.data, "training dataset (JSONL)");
    cmd->add_option("--test", a.test, "test dataset (JSONL), required with --data");
    cmd->add_option("--synth-classes", a.synth_classes, "generate synthetic data: class count");
    cmd->add_option("--synth-per-class", a.synth_per_class, "synthetic train sequences per class");
    cmd->add_option("--synth-test-per-class", a.synth_test_per_class,
                    "synthetic test sequences per class");
    cmd->add_option("--synth-frames", a.synth_frames, "synthetic sequence length");
    cmd->add_option("--synth-keypoints", a.synth_keypoints, "synthetic keypoint count");
    cmd->add_option("--synth-dim", a.synth_dim, "synthetic coordinate dimension");
    cmd->add_option("--synth-noise", a.synth_noise, "synthetic noise std");
    cmd->add_option("--mode", a.mode, "c | rc | ric | sesar (comma list in sweep)");
    cmd->add_option("--strategy", a.strategy, "u | kt | kjs | cs | dis (comma list in sweep)");
    cmd->add_option("--schedule", a.schedule, "cumulative label fractions, e.g. 0.05,0.10,0.20");
    cmd->add_option("--clusters", a.clusters, "cluster count (default min(2C, n))");
    cmd->add_option("--hidden", a.hidden, "GRU hidden units per direction");
    cmd->add_option("--layers", a.layers, "encoder depth");
    cmd->add_option("--iters", a.iters, "training iterations per round");
    cmd->add_option("--batch", a.batch, "minibatch size");
    cmd->add_option("--lr", a.lr, "base learning rate");
    cmd->add_option("--decay", a.decay, "lr decay factor");
    cmd->add_option("--decay-interval", a.decay_interval, "iterations per decay step");
    cmd->add_option("--seed", a.seeds, "experiment seed(s), comma separated");
    cmd->add_option("--uncertainty", a.uncertainty, "ep | vr (for kjs)");
    cmd->add_flag("--freeze-decoder", a.freeze_decoder, "freeze decoder weights");
    cmd->add_option("--ric-warmup", a.ric_warmup, "reconstruction warmup iterations (ric)");
    cmd->add_flag("--reinit-rounds", a.reinit_rounds, "reinitialize the model every round");
    cmd->add_flag("--timing", a.timing, "record wall-clock seconds in reports (non-deterministic)");
    cmd->add_flag("--pca", a.pca, "dump 2-D PCA of latents per round");
    cmd->add_flag("--serial", a.serial, "disable OpenMP kernels");
    cmd->add_option("--threads", a.threads, "OpenMP thread count (0 = runtime default)");
    cmd->add_option("--out", a.out, "output directory");
}

ExperimentConfig build_config(const CommonArgs& a) {
    ExperimentConfig cfg;
    if (!a.data.empty()) {
        cfg.data_path = a.data;
        if (!a.test.empty()) cfg.test_path = a.test;
    } else if (a.synth_classes > 0) {
        SynthConfig sc;
        sc.num_classes = a.synth_classes;
        sc.sequences_per_class = a.synth_per_class;
        sc.frames = a.synth_frames;
        sc.num_keypoints = a.synth_keypoints;
        sc.dim = a.synth_dim;
        sc.noise_std = a.synth_noise;
        cfg.synth = sc;
        cfg.synth_test_per_class = a.synth_test_per_class;
    }
    cfg.schedule = parse_schedule(a.schedule);
    cfg.seeds = parse_seeds(a.seeds);
    cfg.hidden = a.hidden;
    cfg.layers = a.layers;
    cfg.clusters = a.clusters;
    cfg.uncertainty = a.uncertainty == "vr" ? UncertaintyKind::VarianceRatio
                                            : UncertaintyKind::Entropy;
    if (a.uncertainty != "ep" && a.uncertainty != "vr")
        throw ConfigError("unknown uncertainty kind: " + a.uncertainty);
    cfg.train.batch_size = a.batch;
    cfg.train.iterations = a.iters;
    cfg.train.base_lr = a.lr;
    cfg.train.decay = a.decay;
    cfg.train.decay_interval = a.decay_interval;
    cfg.train.freeze_decoder = a.freeze_decoder;
    cfg.train.weight_re = a.weight_re;
    cfg.train.weight_cla = a.weight_cla;
    cfg.ric_warmup = a.ric_warmup;
    cfg.reinit_rounds = a.reinit_rounds;
    cfg.measure_wallclock = a.timing;
    cfg.pca_dump = a.pca;
    cfg.policy = a.serial ? ExecPolicy::Serial : ExecPolicy::Parallel;
    cfg.out_dir = a.out;
    set_threads(a.threads);
    return cfg;
}

void print_summary(const std::vector<RunResult>& runs) {
    for (const auto& run : runs)
        for (const auto& r : run.rounds)
            std::printf("%-5s %-4s seed=%llu round=%d labels=%ld pct=%.4g acc=%.4f\n",
                        mode_name(run.mode).c_str(), strategy_name(run.strategy).c_str(),
                        static_cast<unsigned long long>(run.seed), r.round, r.labels, r.pct,
                        r.accuracy);
}

int cmd_synth(const CommonArgs& a, const std::string& out_file, uint64_t seed) {
    SynthConfig sc;
    sc.num_classes = a.synth_classes > 0 ? a.synth_classes : 6;
    sc.sequences_per_class = a.synth_per_class;
    sc.frames = a.synth_frames;
    sc.num_keypoints = a.synth_keypoints;
    sc.dim = a.synth_dim;
    sc.noise_std = a.synth_noise;
    sc.seed = seed;
    Dataset ds = synth_generate(sc);
    save_jsonl(ds, out_file);
    std::printf("wrote %d sequences (%d classes) to %s\n", ds.size(), ds.num_classes,
                out_file.c_str());
    return 0;
}

int cmd_run(const CommonArgs& a, bool sweep) {
    ExperimentConfig cfg = build_config(a);
    std::vector<Mode> modes;
    std::vector<Strategy> strategies;
    for (const auto& m : split_csv(a.mode)) modes.push_back(parse_mode(m));
    for (const auto& s : split_csv(a.strategy)) strategies.push_back(parse_strategy(s));
    if (!sweep && (modes.size() != 1 || strategies.size() != 1))
        throw ConfigError("train takes a single mode and strategy; use sweep for lists");

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<RunResult> runs = run_sweep(cfg, modes, strategies);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    emit_report(runs, cfg.out_dir);
    print_summary(runs);
    std::printf("total %.1fs, reports in %s\n", elapsed, cfg.out_dir.c_str());
    return 0;
}

int cmd_gradcheck(int hidden, int layers, int frames, int keypoints, int dim, int classes,
                  uint64_t seed, int coords, double tolerance) {
    SynthConfig sc;
    sc.num_classes = classes;
    sc.sequences_per_class = 2;
    sc.frames = frames;
    sc.num_keypoints = keypoints;
    sc.dim = dim;
    sc.noise_std = 0.3;
    sc.seed = seed;
    Dataset ds = synth_generate(sc);

    ModelConfig mc;
    mc.input_size = ds.frame_width();
    mc.num_classes = classes;
    mc.hidden = hidden;
    mc.layers = layers;
    mc.init_seed = seed;
    SesarModel model = SesarModel::create(mc);
    TrainConfig tc;

    // One labeled + one unlabeled sample exercises both loss branches.
    auto forward = [&]() {
        SampleTape t1, t2;
        return sample_forward(model, ds.sequences[0], 0, tc, t1) +
               sample_forward(model, ds.sequences[1], std::nullopt, tc, t2);
    };
    auto params = model.params();
    auto backward = [&]() {
        for (Param* p : params) p->zero_grad();
        SampleTape t1, t2;
        sample_forward(model, ds.sequences[0], 0, tc, t1);
        sample_backward(model, t1, tc);
        sample_forward(model, ds.sequences[1], std::nullopt, tc, t2);
        sample_backward(model, t2, tc);
    };

    GradCheckReport report = grad_check(params, forward, backward, coords, 1e-5, seed);
    std::printf("checked %d coordinates, max relative error %.3e (worst: %s)\n",
                report.coords_checked, report.max_rel_err, report.worst_param.c_str());
    if (report.max_rel_err < tolerance) {
        std::printf("PASS (tolerance %.1e)\n", tolerance);
        return 0;
    }
    std::printf("FAIL (tolerance %.1e)\n", tolerance);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-supervised active learning for skeleton sequences"};
    app.require_subcommand(1);

    CommonArgs synth_args;
    std::string synth_out = "synth.jsonl";
    uint64_t synth_seed = 7;
    auto* synth = app.add_subcommand("synth", "emit a synthetic JSONL dataset");
    synth->add_option("--classes", synth_args.synth_classes, "class count")->required();
    synth->add_option("--per-class", synth_args.synth_per_class, "sequences per class");
    synth->add_option("--frames", synth_args.synth_frames, "sequence length");
    synth->add_option("--keypoints", synth_args.synth_keypoints, "keypoint count");
    synth->add_option("--dim", synth_args.synth_dim, "coordinate dimension");
    synth->add_option("--noise", synth_args.synth_noise, "noise std");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--out", synth_out, "output file");

    CommonArgs train_args;
    auto* train = app.add_subcommand("train", "run one experiment");
    add_common_flags(train, train_args);

    CommonArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "run a mode x strategy x seed matrix");
    add_common_flags(sweep, sweep_args);

    int gc_hidden = 8, gc_layers = 2, gc_frames = 5, gc_keypoints = 4, gc_dim = 2,
        gc_classes = 3, gc_coords = 300;
    uint64_t gc_seed = 1;
    double gc_tolerance = 1e-3;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->add_option("--hidden", gc_hidden, "hidden units per direction");
    gradcheck->add_option("--layers", gc_layers, "encoder depth");
    gradcheck->add_option("--frames", gc_frames, "sequence length");
    gradcheck->add_option("--keypoints", gc_keypoints, "keypoint count");
    gradcheck->add_option("--dim", gc_dim, "coordinate dimension");
    gradcheck->add_option("--classes", gc_classes, "class count");
    gradcheck->add_option("--seed", gc_seed, "seed");
    gradcheck->add_option("--coords", gc_coords, "coordinates to sample");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error allowed");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(synth))
            return cmd_synth(synth_args, synth_out, synth_seed);
        if (app.got_subcommand(train)) return cmd_run(train_args, false);
        if (app.got_subcommand(sweep)) return cmd_run(sweep_args, true);
        if (app.got_subcommand(gradcheck))
            return cmd_gradcheck(gc_hidden, gc_layers, gc_frames, gc_keypoints, gc_dim,
                                 gc_classes, gc_seed, gc_coords, gc_tolerance);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const sesar::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const sesar::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
