#include "sesar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sesar/errors.hpp"
#include "sesar/rng.hpp"

namespace sesar {

using nlohmann::json;

void Dataset::validate() const {
    if (sequences.empty()) throw DataError("empty dataset");
    if (num_classes <= 0 || num_keypoints <= 0 || dim <= 0)
        throw DataError("dataset dimensions must be positive");
    std::set<std::string> ids;
    const int width = frame_width();
    for (const auto& seq : sequences) {
        if (!ids.insert(seq.id).second) throw DataError("duplicate sequence id: " + seq.id);
        if (seq.frames.rows < 2)
            throw DataError("sequence " + seq.id + " has fewer than 2 frames");
        if (seq.frames.cols != width)
            throw DataError("sequence " + seq.id + " frame width mismatch");
        if (!all_finite(seq.frames.data))
            throw DataError("sequence " + seq.id + " contains non-finite values");
        if (seq.label && (*seq.label < 0 || *seq.label >= num_classes))
            throw DataError("sequence " + seq.id + " label out of range");
    }
}

LabelPool LabelPool::all_unlabeled(int n) {
    LabelPool pool;
    pool.unlabeled.resize(n);
    for (int i = 0; i < n; ++i) pool.unlabeled[i] = i;
    return pool;
}

void LabelPool::validate(int n) const {
    std::vector<char> seen(n, 0);
    for (int i : labeled) {
        if (i < 0 || i >= n || seen[i]) throw DataError("label pool: bad labeled index");
        seen[i] = 1;
    }
    for (int i : unlabeled) {
        if (i < 0 || i >= n || seen[i]) throw DataError("label pool: bad unlabeled index");
        seen[i] = 1;
    }
    for (char s : seen)
        if (!s) throw DataError("label pool: partition does not cover all indices");
    if (revealed_labels.size() != labeled.size())
        throw DataError("label pool: revealed label count mismatch");
    for (int i : labeled)
        if (!revealed_labels.count(i)) throw DataError("label pool: labeled index missing label");
}

namespace {

// Frame width -> (N, D) when no header line is present. D=3 is the common
// coordinate dimension; anything not divisible by 3 degrades to D=1.
std::pair<int, int> infer_layout(int width) {
    if (width % 3 == 0) return {width / 3, 3};
    return {width, 1};
}

}  // namespace

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    Dataset ds;
    bool have_header = false;
    int width = -1;
    int max_label = -1;
    std::string line;
    int line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (line_no == 1 && obj.contains("num_classes")) {
            ds.num_classes = obj.at("num_classes").get<int>();
            ds.num_keypoints = obj.value("num_keypoints", 0);
            ds.dim = obj.value("dim", 0);
            if (ds.num_classes <= 0 || ds.num_keypoints <= 0 || ds.dim <= 0)
                throw DataError("line 1: invalid header");
            width = ds.frame_width();
            have_header = true;
            continue;
        }

        SkeletonSequence seq;
        try {
            seq.id = obj.at("id").get<std::string>();
            if (obj.contains("label") && !obj.at("label").is_null())
                seq.label = obj.at("label").get<int>();
            const auto& frames = obj.at("frames");
            if (!frames.is_array() || frames.empty())
                throw DataError("line " + std::to_string(line_no) + ": frames must be a non-empty array");
            const int T = static_cast<int>(frames.size());
            const int w = static_cast<int>(frames.at(0).size());
            if (width < 0) width = w;
            if (w != width || w == 0)
                throw DataError("line " + std::to_string(line_no) + ": frame width " +
                                std::to_string(w) + " does not match dataset width " +
                                std::to_string(width));
            seq.frames = Matrix(T, width);
            for (int t = 0; t < T; ++t) {
                const auto& row = frames.at(t);
                if (static_cast<int>(row.size()) != width)
                    throw DataError("line " + std::to_string(line_no) + ": frame " +
                                    std::to_string(t) + " has length " +
                                    std::to_string(row.size()) + ", expected " +
                                    std::to_string(width));
                for (int c = 0; c < width; ++c) seq.frames(t, c) = row.at(c).get<double>();
            }
            if (obj.contains("meta"))
                for (auto& [k, v] : obj.at("meta").items())
                    seq.meta[k] = v.get<std::string>();
        } catch (const DataError&) {
            throw;
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (seq.label) max_label = std::max(max_label, *seq.label);
        ds.sequences.push_back(std::move(seq));
    }

    if (ds.sequences.empty()) throw DataError("empty dataset");
    if (!have_header) {
        auto [n, d] = infer_layout(width);
        ds.num_keypoints = n;
        ds.dim = d;
        ds.num_classes = max_label + 1;
        if (ds.num_classes <= 0)
            throw DataError("dataset has no labels and no header to define num_classes");
    }
    ds.validate();
    return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    json header = {{"num_classes", ds.num_classes},
                   {"num_keypoints", ds.num_keypoints},
                   {"dim", ds.dim}};
    out << header.dump() << "\n";
    for (const auto& seq : ds.sequences) {
        json obj;
        obj["id"] = seq.id;
        obj["label"] = seq.label ? json(*seq.label) : json(nullptr);
        json frames = json::array();
        for (int t = 0; t < seq.frames.rows; ++t) {
            json row = json::array();
            for (int c = 0; c < seq.frames.cols; ++c) row.push_back(seq.frames(t, c));
            frames.push_back(std::move(row));
        }
        obj["frames"] = std::move(frames);
        if (!seq.meta.empty()) obj["meta"] = seq.meta;
        out << obj.dump() << "\n";
    }
}

SkeletonSequence normalize(const SkeletonSequence& seq, int num_keypoints, int dim,
                           int root_index) {
    if (root_index < 0 || root_index >= num_keypoints)
        throw DataError("root index out of range");
    SkeletonSequence out = seq;
    const int T = seq.frames.rows;

    double distance_sum = 0.0;
    for (int t = 0; t < T; ++t) {
        const double* root = seq.frames.row_ptr(t) + root_index * dim;
        double* dst = out.frames.row_ptr(t);
        double farthest = 0.0;
        for (int k = 0; k < num_keypoints; ++k) {
            double sq = 0.0;
            for (int d = 0; d < dim; ++d) {
                double v = seq.frames(t, k * dim + d) - root[d];
                dst[k * dim + d] = v;
                sq += v * v;
            }
            farthest = std::max(farthest, std::sqrt(sq));
        }
        distance_sum += farthest;
    }

    const double scale = distance_sum / T;
    if (scale > 0.0)
        for (double& v : out.frames.data) v /= scale;
    return out;
}

SkeletonSequence resample_length(const SkeletonSequence& seq, int t_out) {
    if (t_out < 2) throw DataError("resample target length must be >= 2");
    const int T = seq.frames.rows;
    if (t_out == T) return seq;

    SkeletonSequence out = seq;
    out.frames = Matrix(t_out, seq.frames.cols);
    const double step = static_cast<double>(T - 1) / (t_out - 1);
    for (int j = 0; j < t_out; ++j) {
        double pos = j * step;
        int lo = std::min(static_cast<int>(pos), T - 2);
        double frac = pos - lo;
        if (j == t_out - 1) {  // exact endpoint
            lo = T - 2;
            frac = 1.0;
        }
        for (int c = 0; c < seq.frames.cols; ++c)
            out.frames(j, c) = (1.0 - frac) * seq.frames(lo, c) + frac * seq.frames(lo + 1, c);
    }
    return out;
}

Dataset synth_generate(const SynthConfig& cfg) {
    if (cfg.num_classes <= 0 || cfg.sequences_per_class <= 0 || cfg.frames < 2 ||
        cfg.num_keypoints <= 0 || cfg.dim <= 0 || cfg.noise_std < 0.0)
        throw ConfigError("invalid synthetic dataset config");

    Dataset ds;
    ds.num_classes = cfg.num_classes;
    ds.num_keypoints = cfg.num_keypoints;
    ds.dim = cfg.dim;

    const int width = cfg.num_keypoints * cfg.dim;
    Rng class_rng(derive_seed(cfg.seed, 0x636c6173));  // amplitude/phase stream
    Rng noise_rng(derive_seed(cfg.seed, 0x6e6f6973));  // per-sample noise stream

    // Per-class harmonic parameters, drawn once. Frequencies are deliberately
    // close so the classes genuinely overlap once noise is added.
    std::vector<Matrix> amplitude(cfg.num_classes), phase(cfg.num_classes);
    std::vector<double> omega(cfg.num_classes);
    for (int k = 0; k < cfg.num_classes; ++k) {
        omega[k] = 0.35 + 0.18 * k;
        amplitude[k] = Matrix(1, width);
        phase[k] = Matrix(1, width);
        for (int c = 0; c < width; ++c) {
            amplitude[k](0, c) = class_rng.uniform(0.5, 1.5);
            phase[k](0, c) = class_rng.uniform(0.0, 2.0 * M_PI);
        }
    }

    for (int k = 0; k < cfg.num_classes; ++k) {
        for (int s = 0; s < cfg.sequences_per_class; ++s) {
            SkeletonSequence seq;
            seq.id = "c" + std::to_string(k) + "_s" + std::to_string(s);
            seq.label = k;
            seq.frames = Matrix(cfg.frames, width);
            for (int t = 0; t < cfg.frames; ++t)
                for (int c = 0; c < width; ++c) {
                    double v = amplitude[k](0, c) * std::sin(omega[k] * t + phase[k](0, c));
                    if (cfg.noise_std > 0.0) v += cfg.noise_std * noise_rng.normal();
                    seq.frames(t, c) = v;
                }
            ds.sequences.push_back(std::move(seq));
        }
    }
    ds.validate();
    return ds;
}

LabelPool oracle_annotate(const LabelPool& pool, const std::vector<int>& chosen,
                          const Dataset& truth) {
    std::set<int> unlabeled_set(pool.unlabeled.begin(), pool.unlabeled.end());
    std::set<int> chosen_set;
    for (int i : chosen) {
        if (!unlabeled_set.count(i))
            throw DataError("oracle: index " + std::to_string(i) + " is not unlabeled");
        if (!chosen_set.insert(i).second)
            throw DataError("oracle: duplicate index " + std::to_string(i));
    }

    LabelPool out = pool;
    for (int i : chosen) {
        if (!truth.sequences.at(i).label)
            throw DataError("oracle: sample " + std::to_string(i) + " has no ground truth label");
        out.revealed_labels[i] = *truth.sequences.at(i).label;
    }
    out.labeled.clear();
    out.unlabeled.clear();
    for (int i = 0; i < pool.total(); ++i) {
        if (out.revealed_labels.count(i))
            out.labeled.push_back(i);
        else
            out.unlabeled.push_back(i);
    }
    return out;
}

}  // namespace sesar
