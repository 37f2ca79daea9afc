#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gar/numcore.hpp"

namespace gar {

// Weights of one LSTM cell:
//   i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + b_i)
//   f_t = sigmoid(W_xf x_t + W_hf h_{t-1} + b_f)
//   o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + b_o)
//   g_t = tanh   (W_xc x_t + W_hc h_{t-1} + b_c)
//   c_t = f_t * c_{t-1} + i_t * g_t
//   h_t = o_t * tanh(c_t)
// Input-side matrices are hidden_dim x input_dim, recurrent ones
// hidden_dim x hidden_dim.
struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix w_xi, w_hi, w_xf, w_hf, w_xo, w_ho, w_xc, w_hc;
    Vec b_i, b_f, b_o, b_c;

    bool operator==(const LstmParams&) const = default;
};

// Gate and state values of one timestep. i, f, o lie in (0,1), g in (-1,1),
// and |h| < 1 entrywise since h = o * tanh(c) with o < 1.
struct LstmState {
    Vec i, f, o, g, c, h;
};

// Affine classification layer fed to a stable softmax.
struct SoftmaxHead {
    Matrix w; // num_classes x in_dim
    Vec b;    // num_classes

    bool operator==(const SoftmaxHead&) const = default;
};

// Everything the backward pass needs: inputs and per-step states.
struct LstmTape {
    Vec h0, c0;
    std::vector<Vec> xs;
    std::vector<LstmState> states;

    std::size_t length() const { return states.size(); }
};

enum class LossMode { AllSteps, LastStep };

// Gradients of the loss w.r.t. every LstmParams field plus the head and the
// inputs. Parameter gradients reuse the LstmParams layout.
struct BpttResult {
    LstmParams param_grads;
    SoftmaxHead head_grads;
    std::vector<Vec> x_grads;
    double loss = 0.0;
};

// All-zero parameter set of the given dims.
LstmParams zero_lstm_params(std::size_t input_dim, std::size_t hidden_dim);

// Scaled-uniform weight init; forget-gate bias is set to 1, other biases 0.
LstmParams init_lstm_params(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

SoftmaxHead zero_head(std::size_t num_classes, std::size_t in_dim);
SoftmaxHead init_head(std::size_t num_classes, std::size_t in_dim, Rng& rng);

LstmState lstm_step(const LstmParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev);

// Unrolls lstm_step over the sequence. h0/c0 empty means zero vectors.
// Throws DomainError on an empty sequence. Verifies |h| < 1 on every step.
LstmTape lstm_forward(const LstmParams& p, std::span<const Vec> xs, const Vec& h0 = {},
                      const Vec& c0 = {});

// Probabilities of W v + b under a max-subtracted softmax; sums to 1.
Vec softmax_apply(const SoftmaxHead& head, const Vec& v);

// Stable softmax of raw logits.
Vec softmax(const Vec& logits);

// -log(probs[label]) with probs clamped below at 1e-12.
double cross_entropy(const Vec& probs, std::size_t label);

// Exact backpropagation through time for the mean cross-entropy over the
// included timesteps (all, or only the last). labels must have one entry per
// timestep in AllSteps mode; LastStep uses labels.back(). loss_scale
// multiplies both the loss and every gradient.
BpttResult bptt(const LstmParams& p, const SoftmaxHead& head, const LstmTape& tape,
                std::span<const std::size_t> labels, LossMode mode, double loss_scale = 1.0);

// Gradient of the mean CE loss of per-step head applications, without any
// recurrent model: used for per-frame classifiers. Returns d loss / d inputs.
struct HeadSequenceGrads {
    SoftmaxHead head_grads;
    std::vector<Vec> input_grads;
    double loss = 0.0;
};
HeadSequenceGrads head_sequence_backward(const SoftmaxHead& head, std::span<const Vec> inputs,
                                         std::span<const std::size_t> labels,
                                         double loss_scale = 1.0);

// Spans over the twelve parameter tensors (input weights, recurrent weights,
// biases) in a fixed order; used by the optimizer and the gradient checker.
std::vector<std::span<double>> lstm_param_refs(LstmParams& p);
std::vector<std::span<double>> head_param_refs(SoftmaxHead& h);

} // namespace gar
