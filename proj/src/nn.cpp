#include "sesar/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sesar {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// out_i = W x + U h + b, written into `out`.
void gate_preact(const Param& w, const Param& u, const Param& b, const Vec& x,
                 const Vec& h, Vec& out) {
    const int rows = w.rows;
    out.assign(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
        double s = b.value[i];
        const double* wr = w.value.data() + static_cast<size_t>(i) * w.cols;
        for (int j = 0; j < w.cols; ++j) s += wr[j] * x[j];
        const double* ur = u.value.data() + static_cast<size_t>(i) * u.cols;
        for (int j = 0; j < u.cols; ++j) s += ur[j] * h[j];
        out[i] = s;
    }
}

// G += da * v^T
void add_outer(Param& p, const Vec& da, const Vec& v) {
    for (int i = 0; i < p.rows; ++i) {
        double* gr = p.grad.data() + static_cast<size_t>(i) * p.cols;
        const double d = da[i];
        for (int j = 0; j < p.cols; ++j) gr[j] += d * v[j];
    }
}

// dst += W^T da
void add_matvec_t(const Param& p, const Vec& da, Vec& dst) {
    for (int i = 0; i < p.rows; ++i) {
        const double* wr = p.value.data() + static_cast<size_t>(i) * p.cols;
        const double d = da[i];
        for (int j = 0; j < p.cols; ++j) dst[j] += wr[j] * d;
    }
}

}  // namespace

void Param::init_uniform(Rng& rng, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : value) v = rng.uniform(-bound, bound);
}

GruLayer::GruLayer(const std::string& prefix, int input, int hidden)
    : input_size(input), hidden_size(hidden),
      w_z(prefix + ".w_z", hidden, input), w_r(prefix + ".w_r", hidden, input),
      w_h(prefix + ".w_h", hidden, input), u_z(prefix + ".u_z", hidden, hidden),
      u_r(prefix + ".u_r", hidden, hidden), u_h(prefix + ".u_h", hidden, hidden),
      b_z(prefix + ".b_z", hidden, 1), b_r(prefix + ".b_r", hidden, 1),
      b_h(prefix + ".b_h", hidden, 1) {}

void GruLayer::init(Rng& rng) {
    w_z.init_uniform(rng, input_size);
    w_r.init_uniform(rng, input_size);
    w_h.init_uniform(rng, input_size);
    u_z.init_uniform(rng, hidden_size);
    u_r.init_uniform(rng, hidden_size);
    u_h.init_uniform(rng, hidden_size);
    // biases stay zero
}

std::vector<Param*> GruLayer::params() {
    return {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h};
}

Vec gru_cell(const GruLayer& layer, const Vec& x, const Vec& h_prev, GruCellCache* cache) {
    check(static_cast<int>(x.size()) == layer.input_size, "gru_cell: input size mismatch");
    check(static_cast<int>(h_prev.size()) == layer.hidden_size, "gru_cell: hidden size mismatch");
    const int h = layer.hidden_size;

    Vec z, r, a;
    gate_preact(layer.w_z, layer.u_z, layer.b_z, x, h_prev, z);
    gate_preact(layer.w_r, layer.u_r, layer.b_r, x, h_prev, r);
    for (int i = 0; i < h; ++i) z[i] = sigmoid(z[i]);
    for (int i = 0; i < h; ++i) r[i] = sigmoid(r[i]);

    Vec rh(h);
    for (int i = 0; i < h; ++i) rh[i] = r[i] * h_prev[i];
    gate_preact(layer.w_h, layer.u_h, layer.b_h, x, rh, a);
    Vec hcand(h);
    for (int i = 0; i < h; ++i) hcand[i] = std::tanh(a[i]);

    Vec h_new(h);
    for (int i = 0; i < h; ++i) h_new[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hcand[i];

    if (cache) {
        cache->x = x;
        cache->h_prev = h_prev;
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->hcand = std::move(hcand);
        cache->h_new = h_new;
    }
    return h_new;
}

void gru_cell_backward(GruLayer& layer, const GruCellCache& cache, const Vec& dh_new,
                       Vec* dx, Vec& dh_prev) {
    const int h = layer.hidden_size;
    Vec dz(h), dhcand(h), da_h(h);
    for (int i = 0; i < h; ++i) {
        dz[i] = dh_new[i] * (cache.hcand[i] - cache.h_prev[i]);
        dhcand[i] = dh_new[i] * cache.z[i];
        dh_prev[i] += dh_new[i] * (1.0 - cache.z[i]);
        da_h[i] = dhcand[i] * (1.0 - cache.hcand[i] * cache.hcand[i]);
    }

    Vec rh(h);
    for (int i = 0; i < h; ++i) rh[i] = cache.r[i] * cache.h_prev[i];
    add_outer(layer.w_h, da_h, cache.x);
    add_outer(layer.u_h, da_h, rh);
    for (int i = 0; i < h; ++i) layer.b_h.grad[i] += da_h[i];

    Vec drh(h, 0.0);
    add_matvec_t(layer.u_h, da_h, drh);
    Vec da_r(h), da_z(h);
    for (int i = 0; i < h; ++i) {
        dh_prev[i] += drh[i] * cache.r[i];
        const double dr = drh[i] * cache.h_prev[i];
        da_r[i] = dr * cache.r[i] * (1.0 - cache.r[i]);
        da_z[i] = dz[i] * cache.z[i] * (1.0 - cache.z[i]);
    }

    add_outer(layer.w_r, da_r, cache.x);
    add_outer(layer.u_r, da_r, cache.h_prev);
    add_outer(layer.w_z, da_z, cache.x);
    add_outer(layer.u_z, da_z, cache.h_prev);
    for (int i = 0; i < h; ++i) {
        layer.b_r.grad[i] += da_r[i];
        layer.b_z.grad[i] += da_z[i];
    }
    add_matvec_t(layer.u_r, da_r, dh_prev);
    add_matvec_t(layer.u_z, da_z, dh_prev);

    if (dx) {
        add_matvec_t(layer.w_z, da_z, *dx);
        add_matvec_t(layer.w_r, da_r, *dx);
        add_matvec_t(layer.w_h, da_h, *dx);
    }
}

BiGruStack::BiGruStack(const std::string& prefix, int input, int hidden, int layers)
    : input_size(input), hidden_size(hidden) {
    check(layers >= 1, "encoder needs at least one layer");
    for (int l = 0; l < layers; ++l) {
        const int in = (l == 0) ? input : 2 * hidden;
        const std::string base = prefix + ".layer" + std::to_string(l);
        fw.emplace_back(base + ".fw", in, hidden);
        bw.emplace_back(base + ".bw", in, hidden);
    }
}

void BiGruStack::init(Rng& rng) {
    for (size_t l = 0; l < fw.size(); ++l) {
        fw[l].init(rng);
        bw[l].init(rng);
    }
}

std::vector<Param*> BiGruStack::params() {
    std::vector<Param*> out;
    for (size_t l = 0; l < fw.size(); ++l) {
        for (Param* p : fw[l].params()) out.push_back(p);
        for (Param* p : bw[l].params()) out.push_back(p);
    }
    return out;
}

Vec encode(const BiGruStack& enc, const Matrix& frames, EncodeTape* tape) {
    check(frames.cols == enc.input_size, "encode: frame width mismatch");
    check(frames.rows >= 1, "encode: empty sequence");
    const int T = frames.rows;
    const int h = enc.hidden_size;
    const int L = enc.num_layers();

    if (tape) {
        tape->layers.assign(L, {});
        tape->T = T;
    }

    std::vector<Vec> input(T);
    for (int t = 0; t < T; ++t) input[t] = frames.row(t);

    for (int l = 0; l < L; ++l) {
        EncodeTape::LayerTape* lt = tape ? &tape->layers[l] : nullptr;
        if (lt) {
            lt->fw.resize(T);
            lt->bw.resize(T);
        }

        std::vector<Vec> fw_states(T), bw_states(T);
        Vec state(h, 0.0);
        for (int t = 0; t < T; ++t) {
            state = gru_cell(enc.fw[l], input[t], state, lt ? &lt->fw[t] : nullptr);
            fw_states[t] = state;
        }
        state.assign(h, 0.0);
        for (int s = 0; s < T; ++s) {
            const int t = T - 1 - s;
            state = gru_cell(enc.bw[l], input[t], state, lt ? &lt->bw[s] : nullptr);
            bw_states[t] = state;
        }

        if (lt) lt->input = std::move(input);
        input.assign(T, Vec());
        for (int t = 0; t < T; ++t) {
            Vec out(2 * h);
            std::copy(fw_states[t].begin(), fw_states[t].end(), out.begin());
            std::copy(bw_states[t].begin(), bw_states[t].end(), out.begin() + h);
            input[t] = std::move(out);
        }
    }

    // H = [top forward final state | top backward final state]
    Vec H(2 * h);
    std::copy(input[T - 1].begin(), input[T - 1].begin() + h, H.begin());
    std::copy(input[0].begin() + h, input[0].end(), H.begin() + h);
    return H;
}

void encode_backward(BiGruStack& enc, const EncodeTape& tape, const Vec& dH) {
    const int T = tape.T;
    const int h = enc.hidden_size;
    const int L = enc.num_layers();
    check(static_cast<int>(dH.size()) == 2 * h, "encode_backward: dH size mismatch");

    // Gradient w.r.t. the current layer's per-step output (2h per step).
    std::vector<Vec> dout(T, Vec(2 * h, 0.0));
    for (int i = 0; i < h; ++i) {
        dout[T - 1][i] += dH[i];
        dout[0][h + i] += dH[h + i];
    }

    for (int l = L - 1; l >= 0; --l) {
        const EncodeTape::LayerTape& lt = tape.layers[l];
        const int in_size = enc.fw[l].input_size;
        std::vector<Vec> din(T, Vec(in_size, 0.0));

        Vec dh(h, 0.0), dh_prev(h);
        for (int t = T - 1; t >= 0; --t) {
            for (int i = 0; i < h; ++i) dh[i] += dout[t][i];
            dh_prev.assign(h, 0.0);
            gru_cell_backward(enc.fw[l], lt.fw[t], dh, &din[t], dh_prev);
            dh = dh_prev;
        }

        dh.assign(h, 0.0);
        for (int s = T - 1; s >= 0; --s) {
            const int t = T - 1 - s;
            for (int i = 0; i < h; ++i) dh[i] += dout[t][h + i];
            dh_prev.assign(h, 0.0);
            gru_cell_backward(enc.bw[l], lt.bw[s], dh, &din[t], dh_prev);
            dh = dh_prev;
        }

        dout = std::move(din);
    }
}

Decoder::Decoder(const std::string& prefix, int frame_width, int latent)
    : cell(prefix + ".cell", frame_width, latent),
      w_out(prefix + ".w_out", frame_width, latent),
      b_out(prefix + ".b_out", frame_width, 1) {}

void Decoder::init(Rng& rng) {
    cell.init(rng);
    w_out.init_uniform(rng, cell.hidden_size);
}

std::vector<Param*> Decoder::params() {
    std::vector<Param*> out = cell.params();
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
}

void Decoder::set_frozen(bool f) {
    for (Param* p : params()) p->frozen = f;
}

Matrix decode(const Decoder& dec, const Vec& H, int T, DecodeTape* tape) {
    if (T < 1) throw std::invalid_argument("decode: T must be >= 1");
    check(static_cast<int>(H.size()) == dec.cell.hidden_size, "decode: latent size mismatch");
    const int width = dec.w_out.rows;

    if (tape) {
        tape->steps.resize(T);
        tape->hidden.resize(T);
    }

    Matrix xhat(T, width);
    const Vec zero_input(dec.cell.input_size, 0.0);
    Vec state = H;
    for (int t = 0; t < T; ++t) {
        state = gru_cell(dec.cell, zero_input, state, tape ? &tape->steps[t] : nullptr);
        for (int i = 0; i < width; ++i) {
            double s = dec.b_out.value[i];
            const double* wr = dec.w_out.value.data() + static_cast<size_t>(i) * dec.w_out.cols;
            for (int j = 0; j < dec.cell.hidden_size; ++j) s += wr[j] * state[j];
            xhat(t, i) = s;
        }
        if (tape) tape->hidden[t] = state;
    }
    return xhat;
}

Vec decode_backward(Decoder& dec, const DecodeTape& tape, const Matrix& dxhat) {
    const int T = dxhat.rows;
    const int latent = dec.cell.hidden_size;
    Vec dh(latent, 0.0), dh_prev(latent);
    Vec dy(dxhat.cols);
    for (int t = T - 1; t >= 0; --t) {
        for (int i = 0; i < dxhat.cols; ++i) dy[i] = dxhat(t, i);
        add_outer(dec.w_out, dy, tape.hidden[t]);
        for (int i = 0; i < dxhat.cols; ++i) dec.b_out.grad[i] += dy[i];
        add_matvec_t(dec.w_out, dy, dh);
        dh_prev.assign(latent, 0.0);
        gru_cell_backward(dec.cell, tape.steps[t], dh, nullptr, dh_prev);
        dh = dh_prev;
    }
    return dh;
}

Linear::Linear(const std::string& prefix, int in, int out)
    : w(prefix + ".w", out, in), b(prefix + ".b", out, 1) {}

void Linear::init(Rng& rng) { w.init_uniform(rng, w.cols); }

std::vector<Param*> Linear::params() { return {&w, &b}; }

Vec linear_apply(const Linear& lin, const Vec& x) {
    check(static_cast<int>(x.size()) == lin.w.cols, "linear: input size mismatch");
    Vec y(lin.w.rows);
    for (int i = 0; i < lin.w.rows; ++i) {
        double s = lin.b.value[i];
        const double* wr = lin.w.value.data() + static_cast<size_t>(i) * lin.w.cols;
        for (int j = 0; j < lin.w.cols; ++j) s += wr[j] * x[j];
        y[i] = s;
    }
    return y;
}

void linear_backward(Linear& lin, const Vec& x, const Vec& dy, Vec& dx) {
    add_outer(lin.w, dy, x);
    for (int i = 0; i < lin.w.rows; ++i) lin.b.grad[i] += dy[i];
    add_matvec_t(lin.w, dy, dx);
}

Vec softmax(const Vec& logits) {
    check(!logits.empty(), "softmax: empty input");
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    Vec p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& v : p) v = std::max(v / sum, 1e-300);
    return p;
}

double l1_loss(const Matrix& x, const Matrix& xhat) {
    check(x.same_shape(xhat), "l1_loss: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) s += std::fabs(x.data[i] - xhat.data[i]);
    return s / static_cast<double>(x.data.size());
}

Matrix l1_loss_backward(const Matrix& x, const Matrix& xhat) {
    check(x.same_shape(xhat), "l1_loss: shape mismatch");
    Matrix d(x.rows, x.cols);
    const double inv = 1.0 / static_cast<double>(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double diff = xhat.data[i] - x.data[i];
        d.data[i] = (diff > 0.0) ? inv : (diff < 0.0 ? -inv : 0.0);
    }
    return d;
}

double cross_entropy(const Vec& logits, int y) {
    check(y >= 0 && y < static_cast<int>(logits.size()), "cross_entropy: label out of range");
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return m + std::log(sum) - logits[y];
}

Vec cross_entropy_backward(const Vec& logits, int y) {
    check(y >= 0 && y < static_cast<int>(logits.size()), "cross_entropy: label out of range");
    Vec d = softmax(logits);
    d[y] -= 1.0;
    return d;
}

void AdamState::attach(const std::vector<Param*>& params) {
    m.clear();
    v.clear();
    for (const Param* p : params) {
        m.emplace_back(p->size(), 0.0);
        v.emplace_back(p->size(), 0.0);
    }
    step = 0;
}

double AdamState::effective_lr() const {
    long k = step / cfg.decay_interval;
    double lr = cfg.base_lr;
    for (long i = 0; i < k; ++i) lr *= cfg.decay;
    return lr;
}

void adam_step(std::vector<Param*>& params, AdamState& state) {
    if (state.m.size() != params.size())
        throw std::logic_error("adam_step: state not attached to these params");
    const double lr = state.effective_lr();
    const long t = state.step + 1;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(t));

    for (size_t k = 0; k < params.size(); ++k) {
        Param& p = *params[k];
        if (!p.frozen) {
            auto& mk = state.m[k];
            auto& vk = state.v[k];
            for (int i = 0; i < p.size(); ++i) {
                const double g = p.grad[i];
                mk[i] = state.cfg.beta1 * mk[i] + (1.0 - state.cfg.beta1) * g;
                vk[i] = state.cfg.beta2 * vk[i] + (1.0 - state.cfg.beta2) * g * g;
                const double mhat = mk[i] / bc1;
                const double vhat = vk[i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
            }
        }
        p.zero_grad();
    }
    ++state.step;
}

GradCheckReport grad_check(std::vector<Param*> params,
                           const std::function<double()>& forward,
                           const std::function<void()>& backward,
                           int min_coords, double eps, uint64_t seed) {
    backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    long total = 0;
    for (Param* p : params) {
        analytic.push_back(p->grad);
        total += p->size();
    }

    // Sample coordinates without replacement across the flattened space.
    std::vector<std::pair<int, int>> coords;
    Rng rng(seed);
    if (total <= min_coords) {
        for (size_t k = 0; k < params.size(); ++k)
            for (int i = 0; i < params[k]->size(); ++i)
                coords.emplace_back(static_cast<int>(k), i);
    } else {
        std::vector<int> flat = rng.sample_without_replacement(static_cast<int>(total), min_coords);
        for (int f : flat) {
            int k = 0;
            while (f >= params[k]->size()) f -= params[k++]->size();
            coords.emplace_back(k, f);
        }
    }

    GradCheckReport report;
    for (auto [k, i] : coords) {
        Param& p = *params[k];
        const double saved = p.value[i];
        p.value[i] = saved + eps;
        const double up = forward();
        p.value[i] = saved - eps;
        const double down = forward();
        p.value[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double ga = analytic[k][i];
        const double rel = std::fabs(ga - numeric) / std::max(1e-8, std::fabs(ga) + std::fabs(numeric));
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_param = p.name;
        }
        ++report.coords_checked;
    }
    return report;
}

}  // namespace sesar
