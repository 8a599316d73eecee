#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sesar/dataset.hpp"
#include "sesar/nn.hpp"
#include "sesar/parallel.hpp"

namespace sesar {

struct ModelConfig {
    int input_size = 0;   // N*D
    int num_classes = 0;  // C
    int hidden = 64;      // per direction
    int layers = 2;
    uint64_t init_seed = 0;
};

enum class LossMode {
    Full,            // reconstruction everywhere + classification on labeled
    ClassifierOnly,  // cross-entropy on labeled samples only (baseline C)
};

struct TrainConfig {
    int batch_size = 32;
    long iterations = 2000;
    double base_lr = 1e-4;
    double decay = 0.95;
    long decay_interval = 1000;
    uint64_t seed = 0;
    bool freeze_decoder = false;
    double weight_re = 1.0;
    double weight_cla = 1.0;
    LossMode loss_mode = LossMode::Full;
};

/// Encoder + weakened decoder + single-linear-layer classifier sharing the
/// latent H, with the optimizer state and iteration counter that persist
/// across annotation rounds.
struct SesarModel {
    ModelConfig cfg;
    BiGruStack encoder;
    Decoder decoder;
    Linear classifier;
    AdamState opt;
    long iteration = 0;

    static SesarModel create(const ModelConfig& cfg);

    int latent_size() const { return encoder.latent_size(); }
    std::vector<Param*> params();
    std::vector<const Param*> params() const;
};

/// Forward state of one sample recorded for the backward pass.
struct SampleTape {
    EncodeTape enc;
    DecodeTape dec;
    Vec H;
    Vec logits;
    Matrix xhat;
    const Matrix* x = nullptr;
    bool has_label = false;
    int label = -1;
    double loss_re = 0.0;
    double loss_cla = 0.0;
    bool recorded = false;
};

/// Per-sample loss dispatch: labeled -> w_re*L_re + w_cla*L_cla,
/// unlabeled -> w_re*L_re. ClassifierOnly mode drops the reconstruction
/// path entirely.
double sample_forward(const SesarModel& model, const SkeletonSequence& seq,
                      std::optional<int> revealed_label, const TrainConfig& cfg,
                      SampleTape& tape);
void sample_backward(SesarModel& model, const SampleTape& tape, const TrainConfig& cfg);

/// Convenience wrapper matching the loss dispatch contract; index must be in
/// the pool and, when labeled, have a revealed label.
double sample_loss(const SesarModel& model, const Dataset& ds, int index,
                   const LabelPool& pool, const TrainConfig& cfg);

struct TrainTrace {
    std::vector<double> loss;  // summed batch loss per iteration

    double first() const { return loss.empty() ? 0.0 : loss.front(); }
    double last() const { return loss.empty() ? 0.0 : loss.back(); }
};

/// Runs cfg.iterations minibatch steps. Batches are consecutive slices of a
/// seeded shuffle over the training indices (all of them in Full mode,
/// labeled only in ClassifierOnly mode), reshuffled on wrap-around.
TrainTrace train(SesarModel& model, const Dataset& ds, const LabelPool& pool,
                 const TrainConfig& cfg);

/// Latents for every sequence, rows in dataset order. Pure inference.
Matrix encode_all(const SesarModel& model, const Dataset& ds,
                  ExecPolicy policy = ExecPolicy::Serial);

/// Softmax class probabilities for each latent row.
Matrix class_probs(const SesarModel& model, const Matrix& latents,
                   ExecPolicy policy = ExecPolicy::Serial);

struct EvalResult {
    double accuracy = 0.0;
    Matrix confusion;  // C x C, rows = truth, cols = prediction
};

/// Argmax of classifier logits on H; ties break to the lowest class index.
EvalResult evaluate(const SesarModel& model, const Dataset& test,
                    ExecPolicy policy = ExecPolicy::Serial);

/// Checkpoint: parameter name -> {shape, data}, optimizer state, iteration
/// counter. Doubles round-trip bit-exactly.
void save_checkpoint(const SesarModel& model, const std::string& path);
void load_checkpoint(SesarModel& model, const std::string& path);

/// Sidecar with the train config and a pool snapshot for exact resumption.
void save_sidecar(const TrainConfig& cfg, const LabelPool& pool, const std::string& path);
void load_sidecar(TrainConfig& cfg, LabelPool& pool, const std::string& path);

}  // namespace sesar
