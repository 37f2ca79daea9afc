#include "gar/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gar {

namespace {

void check_dims(const LstmParams& p) {
    auto bad = [&](const Matrix& m, std::size_t r, std::size_t c) {
        return m.rows() != r || m.cols() != c;
    };
    bool ok = !bad(p.w_xi, p.hidden_dim, p.input_dim) && !bad(p.w_xf, p.hidden_dim, p.input_dim) &&
              !bad(p.w_xo, p.hidden_dim, p.input_dim) && !bad(p.w_xc, p.hidden_dim, p.input_dim) &&
              !bad(p.w_hi, p.hidden_dim, p.hidden_dim) &&
              !bad(p.w_hf, p.hidden_dim, p.hidden_dim) &&
              !bad(p.w_ho, p.hidden_dim, p.hidden_dim) &&
              !bad(p.w_hc, p.hidden_dim, p.hidden_dim) && p.b_i.size() == p.hidden_dim &&
              p.b_f.size() == p.hidden_dim && p.b_o.size() == p.hidden_dim &&
              p.b_c.size() == p.hidden_dim;
    if (!ok) throw ShapeError("inconsistent LstmParams dims");
}

// gate pre-activation: W_x x + W_h h + b
Vec preact(const Matrix& wx, const Matrix& wh, const Vec& b, const Vec& x, const Vec& h) {
    Vec a = matvec(wx, x);
    Vec ah = matvec(wh, h);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += ah[i] + b[i];
    return a;
}

} // namespace

LstmParams zero_lstm_params(std::size_t input_dim, std::size_t hidden_dim) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.w_xi = Matrix(hidden_dim, input_dim);
    p.w_xf = Matrix(hidden_dim, input_dim);
    p.w_xo = Matrix(hidden_dim, input_dim);
    p.w_xc = Matrix(hidden_dim, input_dim);
    p.w_hi = Matrix(hidden_dim, hidden_dim);
    p.w_hf = Matrix(hidden_dim, hidden_dim);
    p.w_ho = Matrix(hidden_dim, hidden_dim);
    p.w_hc = Matrix(hidden_dim, hidden_dim);
    p.b_i = Vec(hidden_dim, 0.0);
    p.b_f = Vec(hidden_dim, 0.0);
    p.b_o = Vec(hidden_dim, 0.0);
    p.b_c = Vec(hidden_dim, 0.0);
    return p;
}

LstmParams init_lstm_params(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    LstmParams p = zero_lstm_params(input_dim, hidden_dim);
    double sx = glorot_scale(hidden_dim, input_dim);
    double sh = glorot_scale(hidden_dim, hidden_dim);
    p.w_xi = init_uniform(hidden_dim, input_dim, sx, rng);
    p.w_hi = init_uniform(hidden_dim, hidden_dim, sh, rng);
    p.w_xf = init_uniform(hidden_dim, input_dim, sx, rng);
    p.w_hf = init_uniform(hidden_dim, hidden_dim, sh, rng);
    p.w_xo = init_uniform(hidden_dim, input_dim, sx, rng);
    p.w_ho = init_uniform(hidden_dim, hidden_dim, sh, rng);
    p.w_xc = init_uniform(hidden_dim, input_dim, sx, rng);
    p.w_hc = init_uniform(hidden_dim, hidden_dim, sh, rng);
    // Forget gate starts open so early training can carry state across steps.
    std::fill(p.b_f.begin(), p.b_f.end(), 1.0);
    return p;
}

SoftmaxHead zero_head(std::size_t num_classes, std::size_t in_dim) {
    return SoftmaxHead{Matrix(num_classes, in_dim), Vec(num_classes, 0.0)};
}

SoftmaxHead init_head(std::size_t num_classes, std::size_t in_dim, Rng& rng) {
    SoftmaxHead h = zero_head(num_classes, in_dim);
    h.w = init_uniform(num_classes, in_dim, glorot_scale(num_classes, in_dim), rng);
    return h;
}

LstmState lstm_step(const LstmParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev) {
    check_dims(p);
    if (x.size() != p.input_dim) {
        throw ShapeError("lstm_step: input dim " + std::to_string(x.size()) + " != " +
                         std::to_string(p.input_dim));
    }
    if (h_prev.size() != p.hidden_dim || c_prev.size() != p.hidden_dim) {
        throw ShapeError("lstm_step: state dim " + std::to_string(h_prev.size()) + "/" +
                         std::to_string(c_prev.size()) + " != " + std::to_string(p.hidden_dim));
    }
    LstmState s;
    s.i = preact(p.w_xi, p.w_hi, p.b_i, x, h_prev);
    s.f = preact(p.w_xf, p.w_hf, p.b_f, x, h_prev);
    s.o = preact(p.w_xo, p.w_ho, p.b_o, x, h_prev);
    s.g = preact(p.w_xc, p.w_hc, p.b_c, x, h_prev);
    s.c.resize(p.hidden_dim);
    s.h.resize(p.hidden_dim);
    for (std::size_t j = 0; j < p.hidden_dim; ++j) {
        s.i[j] = sigmoid(s.i[j]);
        s.f[j] = sigmoid(s.f[j]);
        s.o[j] = sigmoid(s.o[j]);
        s.g[j] = tanh_act(s.g[j]);
        s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
        s.h[j] = s.o[j] * tanh_act(s.c[j]);
    }
    return s;
}

LstmTape lstm_forward(const LstmParams& p, std::span<const Vec> xs, const Vec& h0,
                      const Vec& c0) {
    if (xs.empty()) throw DomainError("lstm_forward: empty sequence");
    LstmTape tape;
    tape.h0 = h0.empty() ? Vec(p.hidden_dim, 0.0) : h0;
    tape.c0 = c0.empty() ? Vec(p.hidden_dim, 0.0) : c0;
    tape.xs.assign(xs.begin(), xs.end());
    tape.states.reserve(xs.size());
    const Vec* h = &tape.h0;
    const Vec* c = &tape.c0;
    for (const Vec& x : xs) {
        tape.states.push_back(lstm_step(p, x, *h, *c));
        const LstmState& s = tape.states.back();
        for (double v : s.h) {
            if (!(std::abs(v) < 1.0)) throw DomainError("lstm_forward: |h| >= 1");
        }
        h = &s.h;
        c = &s.c;
    }
    return tape;
}

Vec softmax(const Vec& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

Vec softmax_apply(const SoftmaxHead& head, const Vec& v) {
    Vec logits = matvec(head.w, v);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += head.b[i];
    return softmax(logits);
}

double cross_entropy(const Vec& probs, std::size_t label) {
    if (label >= probs.size()) {
        throw DomainError("cross_entropy: label " + std::to_string(label) + " >= " +
                          std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs[label], 1e-12));
}

BpttResult bptt(const LstmParams& p, const SoftmaxHead& head, const LstmTape& tape,
                std::span<const std::size_t> labels, LossMode mode, double loss_scale) {
    const std::size_t T = tape.length();
    if (T == 0) throw DomainError("bptt: empty tape");
    if (mode == LossMode::AllSteps && labels.size() != T) {
        throw DomainError("bptt: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(T) + " timesteps");
    }
    if (mode == LossMode::LastStep && labels.empty()) {
        throw DomainError("bptt: no label for last-step loss");
    }

    BpttResult r;
    r.param_grads = zero_lstm_params(p.input_dim, p.hidden_dim);
    r.head_grads = zero_head(head.w.rows(), head.w.cols());
    r.x_grads.assign(T, Vec(p.input_dim, 0.0));

    const std::size_t n_included = (mode == LossMode::AllSteps) ? T : 1;
    const double w = loss_scale / static_cast<double>(n_included);

    // Head pass: loss and dL/dh_t contributions per included step.
    std::vector<Vec> dh_head(T, Vec(p.hidden_dim, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        if (mode == LossMode::LastStep && t + 1 != T) continue;
        std::size_t label = (mode == LossMode::AllSteps) ? labels[t] : labels.back();
        const Vec& h = tape.states[t].h;
        Vec probs = softmax_apply(head, h);
        r.loss += w * cross_entropy(probs, label);
        // dCE/dlogits = probs - onehot
        probs[label] -= 1.0;
        for (double& v : probs) v *= w;
        add_outer(r.head_grads.w, probs, h);
        axpy(r.head_grads.b, 1.0, probs);
        dh_head[t] = matvec_t(head.w, probs);
    }

    // Backward recurrence over timesteps.
    Vec dh_next(p.hidden_dim, 0.0);
    Vec dc_next(p.hidden_dim, 0.0);
    for (std::size_t ti = T; ti-- > 0;) {
        const LstmState& s = tape.states[ti];
        const Vec& h_prev = (ti == 0) ? tape.h0 : tape.states[ti - 1].h;
        const Vec& c_prev = (ti == 0) ? tape.c0 : tape.states[ti - 1].c;
        Vec da_i(p.hidden_dim), da_f(p.hidden_dim), da_o(p.hidden_dim), da_g(p.hidden_dim);
        Vec dc_prev(p.hidden_dim);
        for (std::size_t j = 0; j < p.hidden_dim; ++j) {
            double dh = dh_head[ti][j] + dh_next[j];
            double tc = tanh_act(s.c[j]);
            double do_ = dh * tc;
            double dc = dh * s.o[j] * (1.0 - tc * tc) + dc_next[j];
            double di = dc * s.g[j];
            double dg = dc * s.i[j];
            double df = dc * c_prev[j];
            dc_prev[j] = dc * s.f[j];
            da_i[j] = di * s.i[j] * (1.0 - s.i[j]);
            da_f[j] = df * s.f[j] * (1.0 - s.f[j]);
            da_o[j] = do_ * s.o[j] * (1.0 - s.o[j]);
            da_g[j] = dg * (1.0 - s.g[j] * s.g[j]);
        }
        const Vec& x = tape.xs[ti];
        add_outer(r.param_grads.w_xi, da_i, x);
        add_outer(r.param_grads.w_xf, da_f, x);
        add_outer(r.param_grads.w_xo, da_o, x);
        add_outer(r.param_grads.w_xc, da_g, x);
        add_outer(r.param_grads.w_hi, da_i, h_prev);
        add_outer(r.param_grads.w_hf, da_f, h_prev);
        add_outer(r.param_grads.w_ho, da_o, h_prev);
        add_outer(r.param_grads.w_hc, da_g, h_prev);
        axpy(r.param_grads.b_i, 1.0, da_i);
        axpy(r.param_grads.b_f, 1.0, da_f);
        axpy(r.param_grads.b_o, 1.0, da_o);
        axpy(r.param_grads.b_c, 1.0, da_g);

        Vec dx = matvec_t(p.w_xi, da_i);
        axpy(dx, 1.0, matvec_t(p.w_xf, da_f));
        axpy(dx, 1.0, matvec_t(p.w_xo, da_o));
        axpy(dx, 1.0, matvec_t(p.w_xc, da_g));
        r.x_grads[ti] = std::move(dx);

        dh_next = matvec_t(p.w_hi, da_i);
        axpy(dh_next, 1.0, matvec_t(p.w_hf, da_f));
        axpy(dh_next, 1.0, matvec_t(p.w_ho, da_o));
        axpy(dh_next, 1.0, matvec_t(p.w_hc, da_g));
        dc_next = std::move(dc_prev);
    }
    return r;
}

std::vector<std::span<double>> lstm_param_refs(LstmParams& p) {
    return {p.w_xi.data(), p.w_hi.data(), p.w_xf.data(), p.w_hf.data(), p.w_xo.data(),
            p.w_ho.data(), p.w_xc.data(), p.w_hc.data(), p.b_i,        p.b_f,
            p.b_o,         p.b_c};
}

std::vector<std::span<double>> head_param_refs(SoftmaxHead& h) { return {h.w.data(), h.b}; }

HeadSequenceGrads head_sequence_backward(const SoftmaxHead& head, std::span<const Vec> inputs,
                                         std::span<const std::size_t> labels, double loss_scale) {
    if (inputs.empty()) throw DomainError("head_sequence_backward: empty input");
    if (inputs.size() != labels.size()) {
        throw DomainError("head_sequence_backward: " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(inputs.size()) + " inputs");
    }
    HeadSequenceGrads r;
    r.head_grads = zero_head(head.w.rows(), head.w.cols());
    r.input_grads.reserve(inputs.size());
    const double w = loss_scale / static_cast<double>(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Vec probs = softmax_apply(head, inputs[t]);
        r.loss += w * cross_entropy(probs, labels[t]);
        probs[labels[t]] -= 1.0;
        for (double& v : probs) v *= w;
        add_outer(r.head_grads.w, probs, inputs[t]);
        axpy(r.head_grads.b, 1.0, probs);
        r.input_grads.push_back(matvec_t(head.w, probs));
    }
    return r;
}

} // namespace gar
