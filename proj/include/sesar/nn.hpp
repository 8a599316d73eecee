#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sesar/matrix.hpp"
#include "sesar/rng.hpp"

namespace sesar {

/// A learnable tensor: values plus an accumulated gradient of equal shape.
struct Param {
    std::string name;
    int rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool frozen = false;

    Param() = default;
    Param(std::string n, int r, int c)
        : name(std::move(n)), rows(r), cols(c),
          value(static_cast<size_t>(r) * c, 0.0),
          grad(static_cast<size_t>(r) * c, 0.0) {}

    int size() const { return rows * cols; }
    double& v(int r, int c) { return value[static_cast<size_t>(r) * cols + c]; }
    double v(int r, int c) const { return value[static_cast<size_t>(r) * cols + c]; }
    double& g(int r, int c) { return grad[static_cast<size_t>(r) * cols + c]; }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    /// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases are left at zero
    /// by simply not calling this.
    void init_uniform(Rng& rng, int fan_in);
};

/// One GRU direction:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   hcand = tanh(W_h x + U_h (r*h) + b_h)
///   h' = (1-z)*h + z*hcand
struct GruLayer {
    int input_size = 0;
    int hidden_size = 0;
    Param w_z, w_r, w_h;  // hidden x input
    Param u_z, u_r, u_h;  // hidden x hidden
    Param b_z, b_r, b_h;  // hidden x 1

    GruLayer() = default;
    GruLayer(const std::string& prefix, int input, int hidden);

    void init(Rng& rng);
    std::vector<Param*> params();
};

struct GruCellCache {
    Vec x, h_prev, z, r, hcand, h_new;
};

/// Single step. When cache is non-null all intermediates needed by the
/// backward pass are recorded there.
Vec gru_cell(const GruLayer& layer, const Vec& x, const Vec& h_prev,
             GruCellCache* cache = nullptr);

/// Accumulates parameter gradients for one step and adds the upstream
/// contributions into dx (may be null) and dh_prev.
void gru_cell_backward(GruLayer& layer, const GruCellCache& cache, const Vec& dh_new,
                       Vec* dx, Vec& dh_prev);

/// Stack of bidirectional GRU layers. Layer l > 0 consumes the concatenated
/// (forward, backward) per-step outputs of layer l-1, so its input size is
/// 2*hidden. The latent H is the concatenation of the top layer's final
/// forward state (after the last frame) and final backward state (after the
/// first frame); |H| = 2*hidden.
struct BiGruStack {
    int input_size = 0;
    int hidden_size = 0;
    std::vector<GruLayer> fw;
    std::vector<GruLayer> bw;

    BiGruStack() = default;
    BiGruStack(const std::string& prefix, int input, int hidden, int layers);

    int num_layers() const { return static_cast<int>(fw.size()); }
    int latent_size() const { return 2 * hidden_size; }
    void init(Rng& rng);
    std::vector<Param*> params();
};

struct EncodeTape {
    struct LayerTape {
        std::vector<Vec> input;           // T frames fed to this layer
        std::vector<GruCellCache> fw;     // processing order t = 0..T-1
        std::vector<GruCellCache> bw;     // processing order t = T-1..0
    };
    std::vector<LayerTape> layers;
    int T = 0;
};

Vec encode(const BiGruStack& enc, const Matrix& frames, EncodeTape* tape = nullptr);
void encode_backward(BiGruStack& enc, const EncodeTape& tape, const Vec& dH);

/// Weakened decoder: a single GRU whose initial hidden state is H and whose
/// input is the zero vector at every step, followed by a linear readout per
/// step.
struct Decoder {
    GruLayer cell;    // input = frame width (always fed zeros), hidden = |H|
    Param w_out;      // frame_width x |H|
    Param b_out;      // frame_width x 1

    Decoder() = default;
    Decoder(const std::string& prefix, int frame_width, int latent);
    void init(Rng& rng);
    std::vector<Param*> params();
    void set_frozen(bool f);
};

struct DecodeTape {
    std::vector<GruCellCache> steps;
    std::vector<Vec> hidden;  // h_1..h_T (post-step states)
};

Matrix decode(const Decoder& dec, const Vec& H, int T, DecodeTape* tape = nullptr);
/// Returns dH (gradient of the loss w.r.t. the latent fed to the decoder).
Vec decode_backward(Decoder& dec, const DecodeTape& tape, const Matrix& dxhat);

struct Linear {
    Param w;  // out x in
    Param b;  // out x 1
    Linear() = default;
    Linear(const std::string& prefix, int in, int out);
    void init(Rng& rng);
    std::vector<Param*> params();
};

Vec linear_apply(const Linear& lin, const Vec& x);
/// Accumulates parameter grads; adds W^T dy into dx.
void linear_backward(Linear& lin, const Vec& x, const Vec& dy, Vec& dx);

/// Softmax with log-sum-exp shift. Outputs are floored at 1e-300 so rows are
/// strictly positive even for extreme logits.
Vec softmax(const Vec& logits);

/// Mean over all entries of |x - xhat|.
double l1_loss(const Matrix& x, const Matrix& xhat);
/// d l1 / d xhat: sign(xhat - x) / count (0 at exact equality).
Matrix l1_loss_backward(const Matrix& x, const Matrix& xhat);

/// -log softmax(logits)[y], stabilized.
double cross_entropy(const Vec& logits, int y);
/// d ce / d logits = softmax(logits) - onehot(y).
Vec cross_entropy_backward(const Vec& logits, int y);

struct AdamConfig {
    double base_lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double decay = 0.95;
    long decay_interval = 1000;
};

/// First/second moment per parameter, a step counter, and the step-decayed
/// learning rate schedule lr(step) = base_lr * decay^floor(step / interval).
struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    void attach(const std::vector<Param*>& params);
    double effective_lr() const;
};

/// One Adam update over all non-frozen params; zeroes every grad afterwards.
void adam_step(std::vector<Param*>& params, AdamState& state);

struct GradCheckReport {
    double max_rel_err = 0.0;
    int coords_checked = 0;
    std::string worst_param;
};

/// Central finite differences on a seeded subsample of at least min_coords
/// coordinates. `forward` must recompute the loss from current param values;
/// `backward` must zero grads and fill them for that same loss.
GradCheckReport grad_check(std::vector<Param*> params,
                           const std::function<double()>& forward,
                           const std::function<void()>& backward,
                           int min_coords = 200, double eps = 1e-5,
                           uint64_t seed = 0);

}  // namespace sesar
