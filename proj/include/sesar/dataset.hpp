#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sesar/matrix.hpp"

namespace sesar {

/// One skeleton sequence: T frames of num_keypoints x dim coordinates,
/// stored flat per frame (row t holds keypoint 0's coords, then keypoint
/// 1's, ...). Keypoint layout (N, D) lives on the owning Dataset.
struct SkeletonSequence {
    std::string id;
    Matrix frames;  // T x (N*D)
    std::optional<int> label;
    std::map<std::string, std::string> meta;

    int length() const { return frames.rows; }
};

struct Dataset {
    std::vector<SkeletonSequence> sequences;
    int num_classes = 0;
    int num_keypoints = 0;
    int dim = 0;
    std::string split = "train";

    int frame_width() const { return num_keypoints * dim; }
    int size() const { return static_cast<int>(sequences.size()); }

    /// Checks the type invariants (shape consistency, label range, unique
    /// ids, T >= 2, finiteness). Throws DataError on violation.
    void validate() const;
};

/// Disjoint partition of training indices into labeled / unlabeled, plus the
/// labels the oracle has revealed. Both index sets are kept in ascending
/// order. Only oracle_annotate moves indices between the two sets.
struct LabelPool {
    std::vector<int> labeled;
    std::vector<int> unlabeled;
    std::map<int, int> revealed_labels;

    static LabelPool all_unlabeled(int n);

    bool is_labeled(int index) const { return revealed_labels.count(index) != 0; }
    int total() const { return static_cast<int>(labeled.size() + unlabeled.size()); }

    /// Partition invariant: labeled and unlabeled are disjoint, together
    /// cover [0, n), and revealed_labels keys equal the labeled set.
    void validate(int n) const;
};

struct SynthConfig {
    int num_classes = 6;
    int sequences_per_class = 100;
    int frames = 16;        // T
    int num_keypoints = 5;  // N
    int dim = 2;            // D
    double noise_std = 0.0;
    uint64_t seed = 0;
};

Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& ds, const std::string& path);

/// Root-centering plus scale normalization: keypoint root_index is moved to
/// the origin in every frame and all coordinates are divided by the mean
/// per-frame root-to-farthest-keypoint distance (skipped when that mean is 0).
SkeletonSequence normalize(const SkeletonSequence& seq, int num_keypoints, int dim,
                           int root_index);

/// Per-coordinate linear interpolation onto t_out equally spaced points over
/// [0, T-1]; endpoints are preserved exactly.
SkeletonSequence resample_length(const SkeletonSequence& seq, int t_out);

/// Deterministic synthetic dataset: class k traces per-coordinate sinusoids
/// with a class-specific frequency and per-class random amplitude/phase,
/// plus per-sample Gaussian noise.
Dataset synth_generate(const SynthConfig& cfg);

/// Moves `chosen` (a subset of the unlabeled set) into the labeled set and
/// copies their ground-truth labels into revealed_labels.
LabelPool oracle_annotate(const LabelPool& pool, const std::vector<int>& chosen,
                          const Dataset& truth);

}  // namespace sesar
