#include "gar/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace gar {

namespace {

double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4});
}

// Central finite differences of loss() over params[lo..hi), compared against
// the analytic gradients. Returns the max relative error seen.
double fd_compare(ParamRefs& params, std::size_t lo, std::size_t hi,
                  const std::function<double()>& loss, const GradBuffers& analytic) {
    double worst = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t j = 0; j < params[i].size(); ++j) {
            double saved = params[i][j];
            params[i][j] = saved + kGradCheckEps;
            double up = loss();
            params[i][j] = saved - kGradCheckEps;
            double down = loss();
            params[i][j] = saved;
            double numeric = (up - down) / (2.0 * kGradCheckEps);
            worst = std::max(worst, rel_error(analytic[i][j], numeric));
        }
    }
    return worst;
}

Vec random_vec(std::size_t dim, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vec v(dim);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Random scene with well-separated pooled coordinates so max-pool argmaxes
// stay away from the finite-difference step.
Scene make_scene(Rng& rng, std::size_t k, std::size_t t_steps, std::size_t obs_dim,
                 std::size_t num_actions, std::size_t num_activities) {
    Scene s;
    s.id = rng.next_u64() % 1000;
    s.group_labels.resize(t_steps);
    for (auto& g : s.group_labels) g = rng.below(num_activities);
    s.persons.resize(k);
    for (std::size_t p = 0; p < k; ++p) {
        Tracklet& tr = s.persons[p];
        tr.obs.resize(t_steps);
        tr.actions.resize(t_steps);
        tr.bbox.resize(t_steps);
        for (std::size_t t = 0; t < t_steps; ++t) {
            tr.obs[t] = random_vec(obs_dim, rng);
            tr.actions[t] = rng.below(num_actions);
            tr.bbox[t] = {static_cast<double>(p) + rng.next_double() * 0.5, rng.next_double()};
        }
    }
    return s;
}

void maybe_corrupt(GradBuffers& grads, const std::string& group,
                   const std::string& corrupt_group) {
    if (group == corrupt_group && !grads.empty() && !grads[0].empty()) grads[0][0] += 1e-2;
}

struct GroupRunner {
    std::string corrupt_group;
    std::vector<GradCheckResult> results;

    void record(const std::string& group, double err) {
        for (auto& r : results) {
            if (r.group == group) {
                r.max_rel_error = std::max(r.max_rel_error, err);
                r.pass = r.max_rel_error < kGradCheckTol;
                return;
            }
        }
        results.push_back({group, err, err < kGradCheckTol});
    }
};

// bptt vs finite differences on a standalone sequence model.
void check_lstm_groups(GroupRunner& g, Rng& rng) {
    const std::size_t input_dim = 3, hidden = 4, T = 3, classes = 3;
    LstmParams p = init_lstm_params(input_dim, hidden, rng);
    SoftmaxHead head = init_head(classes, hidden, rng);
    std::vector<Vec> xs(T);
    std::vector<std::size_t> labels(T);
    for (std::size_t t = 0; t < T; ++t) {
        xs[t] = random_vec(input_dim, rng);
        labels[t] = rng.below(classes);
    }

    auto loss = [&]() {
        LstmTape tape = lstm_forward(p, xs);
        double total = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            total += cross_entropy(softmax_apply(head, tape.states[t].h), labels[t]);
        }
        return total / static_cast<double>(T);
    };

    LstmTape tape = lstm_forward(p, xs);
    BpttResult res = bptt(p, head, tape, labels, LossMode::AllSteps);

    ParamRefs lstm_refs = lstm_param_refs(p);
    GradBuffers lstm_grads;
    for (auto s : lstm_param_refs(res.param_grads)) {
        lstm_grads.emplace_back(s.begin(), s.end());
    }
    maybe_corrupt(lstm_grads, "lstm_cell", g.corrupt_group);
    g.record("lstm_cell", fd_compare(lstm_refs, 0, lstm_refs.size(), loss, lstm_grads));

    ParamRefs head_refs = head_param_refs(head);
    GradBuffers head_grads;
    for (auto s : head_param_refs(res.head_grads)) {
        head_grads.emplace_back(s.begin(), s.end());
    }
    maybe_corrupt(head_grads, "softmax_head", g.corrupt_group);
    g.record("softmax_head", fd_compare(head_refs, 0, head_refs.size(), loss, head_grads));
}

// pool_backward vs finite differences of a weighted sum of the pooled vector.
void check_pooling_group(GroupRunner& g, Rng& rng, PoolStrategy strategy,
                         const std::string& name) {
    const std::size_t n = 5, dim = 6;
    std::vector<Vec> inputs(n);
    // Keep coordinates pairwise separated so the max argmax cannot flip
    // within the finite-difference step.
    for (std::size_t i = 0; i < n; ++i) {
        inputs[i] = random_vec(dim, rng);
        for (double& x : inputs[i]) x = std::round(x * 100.0) / 100.0 + 1e-3 * double(i);
    }
    Vec weights = random_vec(dim, rng);

    auto loss = [&]() {
        Vec pooled = pool_group(inputs, GroupBounds{1, n}, strategy);
        return dot(weights, pooled);
    };

    std::vector<Vec> analytic = pool_backward(strategy, inputs, weights);
    GradBuffers flat;
    for (auto& a : analytic) flat.push_back(a);
    maybe_corrupt(flat, name, g.corrupt_group);

    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            double saved = inputs[i][j];
            inputs[i][j] = saved + kGradCheckEps;
            double up = loss();
            inputs[i][j] = saved - kGradCheckEps;
            double down = loss();
            inputs[i][j] = saved;
            worst = std::max(worst, rel_error(flat[i][j], (up - down) / (2 * kGradCheckEps)));
        }
    }
    g.record(name, worst);
}

ModelConfig tiny_config(ModelVariant variant, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.obs_dim = 3;
    cfg.encoder_hidden = 4;
    cfg.feature_dim = 4;
    cfg.stage1_hidden = 4;
    cfg.stage1_timesteps = 2;
    cfg.stage2_hidden = 4;
    cfg.stage2_timesteps = 3;
    cfg.fc_dim = 5;
    cfg.pooling = {PoolStrategy::Max, 2};
    cfg.num_actions = 3;
    cfg.num_activities = 3;
    cfg.variant = variant;
    cfg.init_seed = seed;
    return cfg;
}

// Stage-1 graph: encoder -> person LSTM -> person head.
void check_stage1_graph(GroupRunner& g, Rng& rng) {
    TrainedModel model = build_model(tiny_config(ModelVariant::Full, rng.next_u64()));
    Scene scene = make_scene(rng, 2, 3, 3, 3, 3);

    ParamRefs refs = stage1_param_refs(model);
    GradBuffers grads = zeros_like(refs);
    stage1_scene_gradients(model, scene, grads);
    maybe_corrupt(grads, "stage1_graph", g.corrupt_group);

    auto loss = [&]() { return stage1_scene_loss(model, scene); };
    g.record("stage1_graph", fd_compare(refs, 0, refs.size(), loss, grads));
}

// Frozen-pooled-input stage-2 graph: fc -> group LSTM -> scene head.
void check_stage2_groups(GroupRunner& g, Rng& rng) {
    TrainedModel model = build_model(tiny_config(ModelVariant::Full, rng.next_u64()));
    model.stage1_done = true;
    Scene scene = make_scene(rng, 2, 3, 3, 3, 3);

    ParamRefs refs = stage2_param_refs(model); // fc(2), lstm(12), head(2)
    GradBuffers grads = zeros_like(refs);
    stage2_scene_gradients(model, scene, grads);

    auto loss = [&]() { return stage2_scene_loss(model, scene); };

    GradBuffers fc_view = grads;
    maybe_corrupt(fc_view, "fc", g.corrupt_group);
    g.record("fc", fd_compare(refs, 0, 2, loss, fc_view));

    GradBuffers full_view = grads;
    maybe_corrupt(full_view, "stage2_graph", g.corrupt_group);
    g.record("stage2_graph", fd_compare(refs, 0, refs.size(), loss, full_view));
}

// Trainable-encoder stage-2 graph (pooled person features into the group
// LSTM); exercises the gradient route back through sub-group pooling.
void check_pooled_encoder_graph(GroupRunner& g, Rng& rng) {
    TrainedModel model = build_model(tiny_config(ModelVariant::B5, rng.next_u64()));
    Scene scene = make_scene(rng, 3, 3, 3, 3, 3);

    ParamRefs refs = stage2_param_refs(model); // encoder(4), lstm(12), head(2)
    GradBuffers grads = zeros_like(refs);
    stage2_scene_gradients(model, scene, grads);
    maybe_corrupt(grads, "pooled_encoder_stage2", g.corrupt_group);

    auto loss = [&]() { return stage2_scene_loss(model, scene); };
    g.record("pooled_encoder_stage2", fd_compare(refs, 0, refs.size(), loss, grads));
}

} // namespace

std::vector<GradCheckResult> run_gradcheck(std::size_t seeds, const std::string& corrupt_group) {
    GroupRunner g;
    g.corrupt_group = corrupt_group;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(0x9a7dULL + s);
        check_lstm_groups(g, rng);
        check_pooling_group(g, rng, PoolStrategy::Max, "pooling_max");
        check_pooling_group(g, rng, PoolStrategy::Average, "pooling_avg");
        check_stage1_graph(g, rng);
        check_stage2_groups(g, rng);
        check_pooled_encoder_graph(g, rng);
    }
    return g.results;
}

bool all_pass(const std::vector<GradCheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const GradCheckResult& r) { return r.pass; });
}

} // namespace gar
