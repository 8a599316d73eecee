#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sesar/errors.hpp"
#include "sesar/harness.hpp"
#include "test_util.hpp"

using namespace sesar;
using testutil::TempDir;

namespace {

// Small, fast experiment config shared by the harness tests.
ExperimentConfig small_config() {
    ExperimentConfig cfg;
    SynthConfig sc;
    sc.num_classes = 3;
    sc.sequences_per_class = 12;
    sc.frames = 6;
    sc.num_keypoints = 3;
    sc.dim = 2;
    sc.noise_std = 0.5;
    cfg.synth = sc;
    cfg.synth_test_per_class = 6;
    cfg.schedule = {0.1, 0.25};
    cfg.hidden = 6;
    cfg.layers = 1;
    cfg.train.iterations = 15;
    cfg.train.batch_size = 6;
    cfg.train.base_lr = 1e-3;
    cfg.ric_warmup = 10;
    cfg.policy = ExecPolicy::Serial;
    return cfg;
}

}  // namespace

TEST_CASE("config validation catches bad schedules") {
    ExperimentConfig cfg = small_config();
    cfg.schedule = {0.2, 0.1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.schedule = {0.5, 1.2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.schedule = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.seeds = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.data_path = "x.jsonl";  // both sources set
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("labeled counts match the schedule exactly for every strategy") {
    ExperimentConfig cfg = small_config();
    const int n = 36;
    for (Strategy s : {Strategy::Uniform, Strategy::KT, Strategy::KJS, Strategy::CoreSet,
                       Strategy::Dis}) {
        cfg.mode = Mode::Sesar;
        cfg.strategy = s;
        RunResult run = run_al(cfg, 5);
        REQUIRE(run.rounds.size() == 2);
        for (size_t k = 0; k < run.rounds.size(); ++k) {
            CHECK(run.rounds[k].labels == std::llround(cfg.schedule[k] * n));
            CHECK(run.rounds[k].round == static_cast<int>(k) + 1);
        }
    }
}

TEST_CASE("schedule [1.0] labels everything regardless of strategy") {
    ExperimentConfig cfg = small_config();
    cfg.schedule = {1.0};
    std::vector<double> accuracies;
    std::vector<double> final_losses;
    for (Strategy s : {Strategy::Uniform, Strategy::KT, Strategy::KJS, Strategy::CoreSet,
                       Strategy::Dis}) {
        cfg.strategy = s;
        RunResult run = run_al(cfg, 9);
        REQUIRE(run.rounds.size() == 1);
        CHECK(run.rounds[0].labels == 36);
        accuracies.push_back(run.rounds[0].accuracy);
        final_losses.push_back(run.rounds[0].loss.last);
    }
    // identical labeled sets + identical seeds -> identical training
    for (size_t i = 1; i < accuracies.size(); ++i) {
        CHECK(accuracies[i] == accuracies[0]);
        CHECK(final_losses[i] == final_losses[0]);
    }
}

TEST_CASE("uniform at five percent labels thirty of six hundred") {
    ExperimentConfig cfg = small_config();
    SynthConfig sc = *cfg.synth;
    sc.num_classes = 6;
    sc.sequences_per_class = 100;
    cfg.synth = sc;
    cfg.synth_test_per_class = 2;
    cfg.schedule = {0.05};
    cfg.strategy = Strategy::Uniform;
    cfg.train.iterations = 2;
    RunResult run = run_al(cfg, 3);
    CHECK(run.rounds[0].labels == 30);
}

TEST_CASE("ric with zero warmup reproduces rc exactly") {
    ExperimentConfig cfg = small_config();
    cfg.ric_warmup = 0;
    cfg.mode = Mode::RIC;
    RunResult ric = run_baseline(cfg, 7);
    cfg.mode = Mode::RC;
    RunResult rc = run_baseline(cfg, 7);
    REQUIRE(ric.rounds.size() == rc.rounds.size());
    for (size_t k = 0; k < rc.rounds.size(); ++k) {
        CHECK(ric.rounds[k].accuracy == rc.rounds[k].accuracy);
        CHECK(ric.rounds[k].loss.last == rc.rounds[k].loss.last);
        CHECK(ric.rounds[k].selection.chosen == rc.rounds[k].selection.chosen);
    }
}

TEST_CASE("baseline c trains on labels alone and stays near chance with none") {
    ExperimentConfig cfg = small_config();
    cfg.mode = Mode::C;
    cfg.train.iterations = 0;  // no training at all
    double mean_acc = 0.0;
    const int seeds = 10;
    for (uint64_t s = 0; s < seeds; ++s) {
        RunResult run = run_baseline(cfg, 100 + s);
        mean_acc += run.rounds.back().accuracy / seeds;
    }
    CHECK(std::fabs(mean_acc - 1.0 / 3.0) < 0.12);  // 3 balanced classes
}

TEST_CASE("pool invariants hold after every round") {
    ExperimentConfig cfg = small_config();
    cfg.strategy = Strategy::KJS;
    cfg.schedule = {0.1, 0.2, 0.4};
    RunResult run = run_al(cfg, 13);  // run_al validates the pool internally
    CHECK(run.rounds.size() == 3);
    long prev = 0;
    for (const auto& r : run.rounds) {
        CHECK(r.labels >= prev);
        prev = r.labels;
    }
}

TEST_CASE("emit_report writes only the header for an empty run list") {
    TempDir dir("emit_empty");
    emit_report({}, dir.file("out"));
    CHECK(testutil::read_file(dir.file("out") + "/results.csv") ==
          "mode,strategy,seed,round,labels,pct,accuracy,seconds\n");
}

TEST_CASE("emit_report emits sorted rows and identical bytes on rerun") {
    ExperimentConfig cfg = small_config();
    cfg.strategy = Strategy::Uniform;
    std::vector<RunResult> runs;
    for (uint64_t seed : {2, 1}) runs.push_back(run_al(cfg, seed));

    const std::string csv = report_csv(runs);
    // 2 seeds x 2 rounds + header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("seed") != std::string::npos);
    // seed 1 rows come before seed 2 rows
    CHECK(csv.find(",1,1,") < csv.find(",2,1,"));

    TempDir dir("emit");
    emit_report(runs, dir.file("a"));
    emit_report(runs, dir.file("b"));
    CHECK(testutil::read_file(dir.file("a") + "/results.csv") ==
          testutil::read_file(dir.file("b") + "/results.csv"));
    CHECK(testutil::read_file(dir.file("a") + "/report.json") ==
          testutil::read_file(dir.file("b") + "/report.json"));
}

TEST_CASE("sweep output is byte-identical across repeat runs") {
    ExperimentConfig cfg = small_config();
    cfg.seeds = {1, 2};
    const std::vector<Mode> modes = {Mode::RC, Mode::Sesar};
    const std::vector<Strategy> strategies = {Strategy::Uniform, Strategy::KT};
    std::string csv1 = report_csv(run_sweep(cfg, modes, strategies));
    std::string csv2 = report_csv(run_sweep(cfg, modes, strategies));
    CHECK(csv1 == csv2);
    // 2 sesar strategies x 2 seeds + rc x 2 seeds = 6 runs x 2 rounds
    CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 13);
}

TEST_CASE("pca dump produces one coordinate pair per training sample") {
    ExperimentConfig cfg = small_config();
    cfg.pca_dump = true;
    cfg.schedule = {0.2};
    RunResult run = run_al(cfg, 21);
    REQUIRE(run.rounds.size() == 1);
    CHECK(run.rounds[0].pca.rows == 36);
    CHECK(run.rounds[0].pca.cols == 2);

    TempDir dir("pca");
    emit_report({run}, dir.file("out"));
    const std::string pca_csv =
        testutil::read_file(dir.file("out") + "/pca_sesar_u_seed21_round1.csv");
    CHECK(pca_csv.rfind("sample_index,pc1,pc2\n", 0) == 0);
    CHECK(std::count(pca_csv.begin(), pca_csv.end(), '\n') == 37);
}

TEST_CASE("experiment data loads from jsonl files") {
    TempDir dir("data");
    SynthConfig sc;
    sc.num_classes = 2;
    sc.sequences_per_class = 8;
    sc.frames = 6;
    sc.num_keypoints = 3;
    sc.dim = 2;
    sc.seed = 4;
    Dataset train = synth_generate(sc);
    sc.seed = 5;
    Dataset test = synth_generate(sc);
    save_jsonl(train, dir.file("train.jsonl"));
    save_jsonl(test, dir.file("test.jsonl"));

    ExperimentConfig cfg = small_config();
    cfg.synth.reset();
    cfg.data_path = dir.file("train.jsonl");
    cfg.test_path = dir.file("test.jsonl");
    cfg.schedule = {0.5};
    RunResult run = run_al(cfg, 1);
    CHECK(run.rounds[0].labels == 8);

    cfg.test_path.reset();
    CHECK_THROWS_AS(run_al(cfg, 1), ConfigError);
}

TEST_CASE("wallclock stays zero unless requested") {
    ExperimentConfig cfg = small_config();
    cfg.schedule = {0.2};
    RunResult off = run_al(cfg, 2);
    CHECK(off.rounds[0].seconds == 0.0);
    cfg.measure_wallclock = true;
    RunResult on = run_al(cfg, 2);
    CHECK(on.rounds[0].seconds > 0.0);
    CHECK(on.rounds[0].accuracy == off.rounds[0].accuracy);
}
