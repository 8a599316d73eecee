#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sesar/dataset.hpp"
#include "sesar/model.hpp"
#include "sesar/selection.hpp"

namespace sesar {

enum class Mode { C, RC, RIC, Sesar };
enum class Strategy { Uniform, KT, KJS, CoreSet, Dis };

std::string mode_name(Mode m);
std::string strategy_name(Strategy s);
Mode parse_mode(const std::string& s);
Strategy parse_strategy(const std::string& s);

struct ExperimentConfig {
    // Data: either a JSONL pair or a synthetic generator config.
    std::optional<std::string> data_path;
    std::optional<std::string> test_path;
    std::optional<SynthConfig> synth;
    int synth_test_per_class = 40;

    Mode mode = Mode::Sesar;
    Strategy strategy = Strategy::Uniform;
    std::vector<double> schedule;  // cumulative label fractions, strictly increasing
    TrainConfig train;
    int hidden = 64;
    int layers = 2;
    int clusters = 0;  // 0 -> min(2C, n)
    UncertaintyKind uncertainty = UncertaintyKind::Entropy;
    std::vector<uint64_t> seeds = {1};
    long ric_warmup = 2000;
    bool reinit_rounds = false;
    bool measure_wallclock = false;
    bool pca_dump = false;
    ExecPolicy policy = ExecPolicy::Parallel;
    std::string out_dir;

    void validate() const;  // throws ConfigError
};

struct LossSummary {
    double first = 0.0;
    double last = 0.0;
    double mean = 0.0;
};

struct RoundReport {
    int round = 0;       // 1-based schedule round
    long labels = 0;     // cumulative |X_l| after this round
    double pct = 0.0;    // schedule entry
    double accuracy = 0.0;
    double seconds = 0.0;
    LossSummary loss;
    SelectionResult selection;
    Matrix confusion;
    Matrix pca;  // n x 2 when pca_dump is on, else empty
};

struct RunResult {
    Mode mode;
    Strategy strategy;
    uint64_t seed = 0;
    std::vector<RoundReport> rounds;
};

/// The iterative AL loop: reconstruction-only round 0, then per schedule
/// entry encode -> (cluster) -> select -> annotate -> train -> evaluate.
RunResult run_al(const ExperimentConfig& cfg, uint64_t seed);

/// C / RC / RIC with seeded uniform label sets at the schedule points.
RunResult run_baseline(const ExperimentConfig& cfg, uint64_t seed);

/// Dispatches on cfg.mode.
RunResult run_experiment(const ExperimentConfig& cfg, uint64_t seed);

/// Crosses modes x strategies x cfg.seeds; independent seeds run
/// concurrently, results are merged in fixed order.
std::vector<RunResult> run_sweep(const ExperimentConfig& cfg,
                                 const std::vector<Mode>& modes,
                                 const std::vector<Strategy>& strategies);

/// Writes results.csv (fixed header), report.json, and per-round PCA CSVs
/// when present. Byte-deterministic for identical report lists.
void emit_report(const std::vector<RunResult>& runs, const std::string& out_dir);

std::string report_csv(const std::vector<RunResult>& runs);

/// Builds the (train, test) pair from the config's data source.
std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig& cfg,
                                                 uint64_t seed);

}  // namespace sesar
