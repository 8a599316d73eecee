#include "sesar/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sesar/errors.hpp"

namespace sesar {

using nlohmann::json;

SesarModel SesarModel::create(const ModelConfig& cfg) {
    if (cfg.input_size <= 0 || cfg.num_classes <= 0 || cfg.hidden <= 0 || cfg.layers <= 0)
        throw ConfigError("invalid model config");
    SesarModel m;
    m.cfg = cfg;
    m.encoder = BiGruStack("encoder", cfg.input_size, cfg.hidden, cfg.layers);
    m.decoder = Decoder("decoder", cfg.input_size, 2 * cfg.hidden);
    m.classifier = Linear("classifier", 2 * cfg.hidden, cfg.num_classes);

    Rng rng(derive_seed(cfg.init_seed, 0x696e6974));
    m.encoder.init(rng);
    m.decoder.init(rng);
    m.classifier.init(rng);
    m.opt.attach(m.params());
    return m;
}

std::vector<Param*> SesarModel::params() {
    std::vector<Param*> out = encoder.params();
    for (Param* p : decoder.params()) out.push_back(p);
    for (Param* p : classifier.params()) out.push_back(p);
    return out;
}

std::vector<const Param*> SesarModel::params() const {
    auto mut = const_cast<SesarModel*>(this)->params();
    return std::vector<const Param*>(mut.begin(), mut.end());
}

double sample_forward(const SesarModel& model, const SkeletonSequence& seq,
                      std::optional<int> revealed_label, const TrainConfig& cfg,
                      SampleTape& tape) {
    tape.x = &seq.frames;
    tape.H = encode(model.encoder, seq.frames, &tape.enc);
    double total = 0.0;

    if (cfg.loss_mode == LossMode::Full) {
        tape.xhat = decode(model.decoder, tape.H, seq.frames.rows, &tape.dec);
        tape.loss_re = l1_loss(seq.frames, tape.xhat);
        total += cfg.weight_re * tape.loss_re;
    }
    if (revealed_label) {
        tape.has_label = true;
        tape.label = *revealed_label;
        tape.logits = linear_apply(model.classifier, tape.H);
        tape.loss_cla = cross_entropy(tape.logits, tape.label);
        total += cfg.weight_cla * tape.loss_cla;
    }
    tape.recorded = true;
    return total;
}

void sample_backward(SesarModel& model, const SampleTape& tape, const TrainConfig& cfg) {
    if (!tape.recorded) throw std::logic_error("sample_backward before sample_forward");
    Vec dH(model.latent_size(), 0.0);

    if (cfg.loss_mode == LossMode::Full) {
        Matrix dxhat = l1_loss_backward(*tape.x, tape.xhat);
        if (cfg.weight_re != 1.0)
            for (double& v : dxhat.data) v *= cfg.weight_re;
        Vec dH_re = decode_backward(model.decoder, tape.dec, dxhat);
        for (size_t i = 0; i < dH.size(); ++i) dH[i] += dH_re[i];
    }
    if (tape.has_label) {
        Vec dlogits = cross_entropy_backward(tape.logits, tape.label);
        if (cfg.weight_cla != 1.0)
            for (double& v : dlogits) v *= cfg.weight_cla;
        linear_backward(model.classifier, tape.H, dlogits, dH);
    }
    encode_backward(model.encoder, tape.enc, dH);
}

double sample_loss(const SesarModel& model, const Dataset& ds, int index,
                   const LabelPool& pool, const TrainConfig& cfg) {
    if (index < 0 || index >= ds.size()) throw DataError("sample_loss: index out of range");
    std::optional<int> label;
    const bool in_labeled =
        std::find(pool.labeled.begin(), pool.labeled.end(), index) != pool.labeled.end();
    if (in_labeled) {
        auto it = pool.revealed_labels.find(index);
        if (it == pool.revealed_labels.end())
            throw DataError("sample_loss: labeled index has no revealed label");
        label = it->second;
    }
    SampleTape tape;
    return sample_forward(model, ds.sequences[index], label, cfg, tape);
}

TrainTrace train(SesarModel& model, const Dataset& ds, const LabelPool& pool,
                 const TrainConfig& cfg) {
    std::vector<int> indices;
    if (cfg.loss_mode == LossMode::ClassifierOnly) {
        indices = pool.labeled;
    } else {
        indices.resize(ds.size());
        for (int i = 0; i < ds.size(); ++i) indices[i] = i;
    }
    TrainTrace trace;
    if (cfg.iterations <= 0) return trace;
    if (indices.empty()) throw DataError("empty training set");
    if (cfg.batch_size <= 0) throw ConfigError("batch size must be positive");

    model.opt.cfg.base_lr = cfg.base_lr;
    model.opt.cfg.decay = cfg.decay;
    model.opt.cfg.decay_interval = cfg.decay_interval;
    model.decoder.set_frozen(cfg.freeze_decoder);

    Rng rng(derive_seed(cfg.seed, 0x74726169));
    std::vector<int> order = indices;
    rng.shuffle(order);
    size_t cursor = 0;

    auto params = model.params();
    trace.loss.reserve(cfg.iterations);
    SampleTape tape;
    for (long it = 0; it < cfg.iterations; ++it) {
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                order = indices;
                rng.shuffle(order);
                cursor = 0;
            }
            const int idx = order[cursor++];
            std::optional<int> label;
            auto lit = pool.revealed_labels.find(idx);
            if (lit != pool.revealed_labels.end()) label = lit->second;

            tape = SampleTape();
            batch_loss += sample_forward(model, ds.sequences[idx], label, cfg, tape);
            sample_backward(model, tape, cfg);
        }
        adam_step(params, model.opt);
        ++model.iteration;
        trace.loss.push_back(batch_loss);
    }
    return trace;
}

Matrix encode_all(const SesarModel& model, const Dataset& ds, ExecPolicy policy) {
    const int n = ds.size();
    Matrix latents(n, model.latent_size());
    parallel_for(n, policy, [&](int i) {
        Vec H = encode(model.encoder, ds.sequences[i].frames);
        latents.set_row(i, H);
    });
    return latents;
}

Matrix class_probs(const SesarModel& model, const Matrix& latents, ExecPolicy policy) {
    const int n = latents.rows;
    Matrix probs(n, model.cfg.num_classes);
    parallel_for(n, policy, [&](int i) {
        Vec p = softmax(linear_apply(model.classifier, latents.row(i)));
        probs.set_row(i, p);
    });
    return probs;
}

namespace {

int argmax_lowest(const Vec& v) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(v.size()); ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

}  // namespace

EvalResult evaluate(const SesarModel& model, const Dataset& test, ExecPolicy policy) {
    const int n = test.size();
    const int C = model.cfg.num_classes;
    for (const auto& seq : test.sequences)
        if (!seq.label) throw DataError("evaluate: unlabeled test sample " + seq.id);

    std::vector<int> preds(n);
    parallel_for(n, policy, [&](int i) {
        Vec H = encode(model.encoder, test.sequences[i].frames);
        preds[i] = argmax_lowest(linear_apply(model.classifier, H));
    });

    EvalResult res;
    res.confusion = Matrix(C, C);
    long correct = 0;
    for (int i = 0; i < n; ++i) {
        const int truth = *test.sequences[i].label;
        res.confusion(truth, preds[i]) += 1.0;
        if (truth == preds[i]) ++correct;
    }
    res.accuracy = n > 0 ? static_cast<double>(correct) / n : 0.0;
    return res;
}

void save_checkpoint(const SesarModel& model, const std::string& path) {
    json doc;
    doc["format"] = 1;
    doc["iteration"] = model.iteration;
    doc["model_config"] = {{"input_size", model.cfg.input_size},
                           {"num_classes", model.cfg.num_classes},
                           {"hidden", model.cfg.hidden},
                           {"layers", model.cfg.layers},
                           {"init_seed", model.cfg.init_seed}};
    json params = json::object();
    for (const Param* p : model.params())
        params[p->name] = {{"shape", {p->rows, p->cols}}, {"data", p->value}};
    doc["params"] = std::move(params);
    doc["adam"] = {{"step", model.opt.step},
                   {"base_lr", model.opt.cfg.base_lr},
                   {"beta1", model.opt.cfg.beta1},
                   {"beta2", model.opt.cfg.beta2},
                   {"eps", model.opt.cfg.eps},
                   {"decay", model.opt.cfg.decay},
                   {"decay_interval", model.opt.cfg.decay_interval},
                   {"m", model.opt.m},
                   {"v", model.opt.v}};

    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump();
}

void load_checkpoint(SesarModel& model, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("checkpoint parse error: ") + e.what());
    }

    const auto& mc = doc.at("model_config");
    if (mc.at("input_size").get<int>() != model.cfg.input_size ||
        mc.at("num_classes").get<int>() != model.cfg.num_classes ||
        mc.at("hidden").get<int>() != model.cfg.hidden ||
        mc.at("layers").get<int>() != model.cfg.layers)
        throw DataError("checkpoint architecture does not match model");

    model.iteration = doc.at("iteration").get<long>();
    for (Param* p : model.params()) {
        const auto& entry = doc.at("params").at(p->name);
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != p->rows || shape[1] != p->cols)
            throw DataError("checkpoint shape mismatch for " + p->name);
        p->value = entry.at("data").get<std::vector<double>>();
        p->zero_grad();
    }
    const auto& adam = doc.at("adam");
    model.opt.step = adam.at("step").get<long>();
    model.opt.cfg.base_lr = adam.at("base_lr").get<double>();
    model.opt.cfg.beta1 = adam.at("beta1").get<double>();
    model.opt.cfg.beta2 = adam.at("beta2").get<double>();
    model.opt.cfg.eps = adam.at("eps").get<double>();
    model.opt.cfg.decay = adam.at("decay").get<double>();
    model.opt.cfg.decay_interval = adam.at("decay_interval").get<long>();
    model.opt.m = adam.at("m").get<std::vector<std::vector<double>>>();
    model.opt.v = adam.at("v").get<std::vector<std::vector<double>>>();
}

void save_sidecar(const TrainConfig& cfg, const LabelPool& pool, const std::string& path) {
    json doc;
    doc["train_config"] = {{"batch_size", cfg.batch_size},
                           {"iterations", cfg.iterations},
                           {"base_lr", cfg.base_lr},
                           {"decay", cfg.decay},
                           {"decay_interval", cfg.decay_interval},
                           {"seed", cfg.seed},
                           {"freeze_decoder", cfg.freeze_decoder},
                           {"weight_re", cfg.weight_re},
                           {"weight_cla", cfg.weight_cla},
                           {"classifier_only", cfg.loss_mode == LossMode::ClassifierOnly}};
    json revealed = json::array();
    for (const auto& [idx, label] : pool.revealed_labels) revealed.push_back({idx, label});
    doc["pool"] = {{"labeled", pool.labeled},
                   {"unlabeled", pool.unlabeled},
                   {"revealed", std::move(revealed)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump();
}

void load_sidecar(TrainConfig& cfg, LabelPool& pool, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json doc = json::parse(in);
    const auto& tc = doc.at("train_config");
    cfg.batch_size = tc.at("batch_size").get<int>();
    cfg.iterations = tc.at("iterations").get<long>();
    cfg.base_lr = tc.at("base_lr").get<double>();
    cfg.decay = tc.at("decay").get<double>();
    cfg.decay_interval = tc.at("decay_interval").get<long>();
    cfg.seed = tc.at("seed").get<uint64_t>();
    cfg.freeze_decoder = tc.at("freeze_decoder").get<bool>();
    cfg.weight_re = tc.at("weight_re").get<double>();
    cfg.weight_cla = tc.at("weight_cla").get<double>();
    cfg.loss_mode = tc.at("classifier_only").get<bool>() ? LossMode::ClassifierOnly
                                                         : LossMode::Full;
    pool = LabelPool();
    pool.labeled = doc.at("pool").at("labeled").get<std::vector<int>>();
    pool.unlabeled = doc.at("pool").at("unlabeled").get<std::vector<int>>();
    for (const auto& pair : doc.at("pool").at("revealed"))
        pool.revealed_labels[pair.at(0).get<int>()] = pair.at(1).get<int>();
}

}  // namespace sesar
