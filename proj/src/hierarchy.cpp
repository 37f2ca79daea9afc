#include "gar/hierarchy.hpp"

#include <algorithm>
#include <cmath>

namespace gar {

std::string variant_name(ModelVariant v) {
    switch (v) {
    case ModelVariant::Full: return "full";
    case ModelVariant::B1: return "b1";
    case ModelVariant::B2: return "b2";
    case ModelVariant::B3: return "b3";
    case ModelVariant::B4: return "b4";
    case ModelVariant::B5: return "b5";
    case ModelVariant::B6: return "b6";
    case ModelVariant::B7: return "b7";
    }
    throw DomainError("unknown variant");
}

ModelVariant variant_from_name(const std::string& name) {
    for (ModelVariant v : {ModelVariant::Full, ModelVariant::B1, ModelVariant::B2,
                           ModelVariant::B3, ModelVariant::B4, ModelVariant::B5, ModelVariant::B6,
                           ModelVariant::B7}) {
        if (variant_name(v) == name) return v;
    }
    throw ConfigError("unknown model variant '" + name + "'");
}

VariantShape variant_shape(ModelVariant v) {
    VariantShape s;
    switch (v) {
    case ModelVariant::Full:
        s.person_encoder = s.stage1_lstm = s.person_head = s.fc = s.stage2_lstm = true;
        s.has_stage1_phase = true;
        break;
    case ModelVariant::B1:
        s.scene_encoder = true;
        break;
    case ModelVariant::B2:
        s.person_encoder = true;
        break;
    case ModelVariant::B3:
        s.person_encoder = s.person_head = true;
        s.has_stage1_phase = true;
        break;
    case ModelVariant::B4:
        s.scene_encoder = s.stage2_lstm = true;
        break;
    case ModelVariant::B5:
        s.person_encoder = s.stage2_lstm = true;
        break;
    case ModelVariant::B6:
        s.person_encoder = s.person_head = s.fc = s.stage2_lstm = true;
        s.has_stage1_phase = true;
        break;
    case ModelVariant::B7:
        s.person_encoder = s.stage1_lstm = s.person_head = s.fc = true;
        s.has_stage1_phase = true;
        break;
    }
    return s;
}

namespace {

// Person representation width going into the pooling layer.
std::size_t repr_dim(const ModelConfig& cfg, const VariantShape& s) {
    return cfg.feature_dim + (s.stage1_lstm ? cfg.stage1_hidden : 0);
}

// Width of the pooled per-frame vector entering the scene path.
std::size_t pooled_dim(const ModelConfig& cfg, const VariantShape& s) {
    if (s.scene_encoder) return cfg.feature_dim;
    return cfg.pooling.groups * repr_dim(cfg, s);
}

std::size_t scene_head_in_dim(const ModelConfig& cfg, const VariantShape& s) {
    if (s.stage2_lstm) return cfg.stage2_hidden;
    if (s.fc) return cfg.fc_dim; // B7
    return pooled_dim(cfg, s);   // B1, B2, B3
}

ParamRefs collect_refs(Encoder* e, LstmParams* l1, SoftmaxHead* ph, FcLayer* fc, LstmParams* l2,
                       SoftmaxHead* sh) {
    ParamRefs refs;
    auto mat = [&](Matrix& m) { refs.emplace_back(m.data()); };
    auto vec = [&](Vec& v) { refs.emplace_back(v); };
    auto lstm = [&](LstmParams& p) {
        mat(p.w_xi);
        mat(p.w_hi);
        mat(p.w_xf);
        mat(p.w_hf);
        mat(p.w_xo);
        mat(p.w_ho);
        mat(p.w_xc);
        mat(p.w_hc);
        vec(p.b_i);
        vec(p.b_f);
        vec(p.b_o);
        vec(p.b_c);
    };
    if (e) {
        mat(e->w1);
        vec(e->b1);
        mat(e->w2);
        vec(e->b2);
    }
    if (l1) lstm(*l1);
    if (ph) {
        mat(ph->w);
        vec(ph->b);
    }
    if (fc) {
        mat(fc->w);
        vec(fc->b);
    }
    if (l2) lstm(*l2);
    if (sh) {
        mat(sh->w);
        vec(sh->b);
    }
    return refs;
}

void add_refs_into(GradBuffers& out, const ParamRefs& src) {
    if (out.size() != src.size()) {
        throw ShapeError("gradient buffer count " + std::to_string(out.size()) + " != " +
                         std::to_string(src.size()));
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (out[i].size() != src[i].size()) throw ShapeError("gradient tensor size mismatch");
        for (std::size_t j = 0; j < src[i].size(); ++j) out[i][j] += src[i][j];
    }
}

struct EncTrace {
    Vec z;   // tanh hidden activations
    Vec out; // linear output features
};

EncTrace encode_trace(const Encoder& e, const Vec& obs) {
    EncTrace tr;
    tr.z = matvec(e.w1, obs);
    for (std::size_t i = 0; i < tr.z.size(); ++i) tr.z[i] = tanh_act(tr.z[i] + e.b1[i]);
    tr.out = matvec(e.w2, tr.z);
    for (std::size_t i = 0; i < tr.out.size(); ++i) tr.out[i] += e.b2[i];
    return tr;
}

void encoder_backward(const Encoder& e, const Vec& obs, const EncTrace& tr, const Vec& dout,
                      Encoder& g) {
    add_outer(g.w2, dout, tr.z);
    axpy(g.b2, 1.0, dout);
    Vec da = matvec_t(e.w2, dout);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 1.0 - tr.z[i] * tr.z[i];
    add_outer(g.w1, da, obs);
    axpy(g.b1, 1.0, da);
}

Encoder zero_encoder_like(const Encoder& e) {
    return Encoder{Matrix(e.w1.rows(), e.w1.cols()), Vec(e.b1.size(), 0.0),
                   Matrix(e.w2.rows(), e.w2.cols()), Vec(e.b2.size(), 0.0)};
}

FcLayer zero_fc_like(const FcLayer& f) {
    return FcLayer{Matrix(f.w.rows(), f.w.cols()), Vec(f.b.size(), 0.0)};
}

Vec apply_fc(const FcLayer& f, const Vec& x) {
    Vec y = matvec(f.w, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += f.b[i];
    return y;
}

// Per-frame person ordering from that frame's bbox keys.
std::vector<std::size_t> frame_order(const Scene& scene, std::size_t t) {
    std::vector<OrderKey> keys(scene.persons.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        keys[k] = {scene.persons[k].bbox[t].first, scene.persons[k].bbox[t].second, k};
    }
    return order_people(keys);
}

// Routes dZ back through the sub-group pooling of one frame.
// ordered[i] are the person reprs in canonical order, perm maps ordered
// position -> person index, and out[k] accumulates each person's gradient.
void pool_route_backward(const std::vector<Vec>& ordered, const std::vector<std::size_t>& perm,
                         const PoolingConfig& cfg, const Vec& dz, std::vector<Vec>& out) {
    const std::size_t k = ordered.size();
    const std::size_t dim = ordered[0].size();
    for (std::size_t m = 1; m <= cfg.groups; ++m) {
        GroupBounds b = subgroup_bounds(k, cfg.groups, m);
        std::span<const Vec> slice(ordered.data() + (b.s - 1), b.size());
        Vec upstream(dz.begin() + static_cast<long>((m - 1) * dim),
                     dz.begin() + static_cast<long>(m * dim));
        std::vector<Vec> slice_grads = pool_backward(cfg.strategy, slice, upstream);
        for (std::size_t i = 0; i < slice_grads.size(); ++i) {
            axpy(out[perm[b.s - 1 + i]], 1.0, slice_grads[i]);
        }
    }
}

} // namespace

TrainedModel build_model(const ModelConfig& cfg) {
    const VariantShape s = variant_shape(cfg.variant);
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("model config: " + msg);
    };
    require(cfg.obs_dim >= 1, "obs_dim must be >= 1");
    require(cfg.encoder_hidden >= 1, "encoder_hidden must be >= 1");
    require(cfg.feature_dim >= 1, "feature_dim must be >= 1");
    require(cfg.num_actions >= 1 && cfg.num_activities >= 1, "label spaces must be non-empty");
    require(cfg.stage2_timesteps >= 1, "stage2_timesteps must be >= 1");
    require(cfg.pooling.groups >= 1, "pooling groups must be >= 1");
    if (s.stage1_lstm) {
        require(cfg.stage1_hidden >= 1, "stage1_hidden must be >= 1 for this variant");
        require(cfg.stage1_timesteps >= 1, "stage1_timesteps must be >= 1");
    }
    if (s.stage2_lstm) require(cfg.stage2_hidden >= 1, "stage2_hidden must be >= 1");
    if (s.fc) require(cfg.fc_dim >= 1, "fc_dim must be >= 1");
    if (s.scene_encoder) {
        require(cfg.pooling.groups == 1,
                variant_name(cfg.variant) + " has no person pooling; requires d = 1");
    }

    TrainedModel model;
    model.config = cfg;
    Rng rng(cfg.init_seed);

    Encoder enc;
    enc.w1 = init_uniform(cfg.encoder_hidden, cfg.obs_dim,
                          glorot_scale(cfg.encoder_hidden, cfg.obs_dim), rng);
    enc.b1 = Vec(cfg.encoder_hidden, 0.0);
    enc.w2 = init_uniform(cfg.feature_dim, cfg.encoder_hidden,
                          glorot_scale(cfg.feature_dim, cfg.encoder_hidden), rng);
    enc.b2 = Vec(cfg.feature_dim, 0.0);
    model.params.encoder = std::move(enc);

    if (s.stage1_lstm) {
        model.params.stage1 = init_lstm_params(cfg.feature_dim, cfg.stage1_hidden, rng);
    }
    if (s.person_head) {
        std::size_t in = s.stage1_lstm ? cfg.stage1_hidden : cfg.feature_dim;
        model.params.person_head = init_head(cfg.num_actions, in, rng);
    }
    if (s.fc) {
        std::size_t in = pooled_dim(cfg, s);
        FcLayer fc;
        fc.w = init_uniform(cfg.fc_dim, in, glorot_scale(cfg.fc_dim, in), rng);
        fc.b = Vec(cfg.fc_dim, 0.0);
        model.params.fc = std::move(fc);
    }
    if (s.stage2_lstm) {
        std::size_t in = s.fc ? cfg.fc_dim : pooled_dim(cfg, s);
        model.params.stage2 = init_lstm_params(in, cfg.stage2_hidden, rng);
    }
    model.params.scene_head = init_head(cfg.num_activities, scene_head_in_dim(cfg, s), rng);
    return model;
}

Vec encode(const Encoder& e, const Vec& obs) { return encode_trace(e, obs).out; }

Vec scene_observation(const Scene& scene, std::size_t t) {
    if (scene.persons.empty()) throw DomainError("scene_observation: no persons");
    Vec mean(scene.persons[0].obs[t].size(), 0.0);
    for (const Tracklet& tr : scene.persons) axpy(mean, 1.0, tr.obs[t]);
    const double inv = 1.0 / static_cast<double>(scene.persons.size());
    for (double& v : mean) v *= inv;
    return mean;
}

std::vector<Vec> person_hidden_states(const LstmParams& p, std::span<const Vec> xs,
                                      std::size_t window) {
    if (window == 0) throw DomainError("person_hidden_states: window must be >= 1");
    std::vector<Vec> hs;
    hs.reserve(xs.size());
    for (std::size_t t0 = 0; t0 < xs.size(); t0 += window) {
        std::size_t len = std::min(window, xs.size() - t0);
        LstmTape tape = lstm_forward(p, xs.subspan(t0, len));
        for (const LstmState& st : tape.states) hs.push_back(st.h);
    }
    return hs;
}

std::vector<Vec> scene_sequence(const TrainedModel& model, const Scene& scene) {
    const ModelConfig& cfg = model.config;
    const VariantShape s = variant_shape(cfg.variant);
    const Encoder& enc = *model.params.encoder;
    const std::size_t T = scene.timesteps();

    std::vector<Vec> zs(T);
    if (s.scene_encoder) {
        for (std::size_t t = 0; t < T; ++t) zs[t] = encode(enc, scene_observation(scene, t));
        return zs;
    }

    const std::size_t K = scene.persons.size();
    std::vector<std::vector<Vec>> reprs(K); // [person][t]
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<Vec> feats(T);
        for (std::size_t t = 0; t < T; ++t) feats[t] = encode(enc, scene.persons[k].obs[t]);
        if (s.stage1_lstm) {
            std::vector<Vec> hs =
                person_hidden_states(*model.params.stage1, feats, cfg.stage1_timesteps);
            reprs[k].resize(T);
            for (std::size_t t = 0; t < T; ++t) {
                reprs[k][t] = concat_person(feats[t], hs[t]);
            }
        } else {
            reprs[k] = std::move(feats);
        }
    }
    std::vector<Vec> ordered(K);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::size_t> perm = frame_order(scene, t);
        for (std::size_t i = 0; i < K; ++i) ordered[i] = reprs[perm[i]][t];
        zs[t] = scene_repr(ordered, cfg.pooling);
    }
    return zs;
}

ParamRefs stage1_param_refs(TrainedModel& model) {
    const VariantShape s = variant_shape(model.config.variant);
    if (!s.has_stage1_phase) {
        throw StateError(variant_name(model.config.variant) + " has no person-action stage");
    }
    return collect_refs(&*model.params.encoder,
                        s.stage1_lstm ? &*model.params.stage1 : nullptr,
                        &*model.params.person_head, nullptr, nullptr, nullptr);
}

namespace {

// Stage-2 trainable components. Anything trained during stage 1 is omitted,
// which freezes it.
struct Stage2Set {
    Encoder* enc = nullptr;
    FcLayer* fc = nullptr;
    LstmParams* l2 = nullptr;
    SoftmaxHead* sh = nullptr;
};

Stage2Set stage2_set(TrainedModel& model) {
    const VariantShape s = variant_shape(model.config.variant);
    Stage2Set set;
    set.sh = &*model.params.scene_head;
    if (!s.has_stage1_phase) set.enc = &*model.params.encoder;
    if (s.fc) set.fc = &*model.params.fc;
    if (s.stage2_lstm) set.l2 = &*model.params.stage2;
    return set;
}

} // namespace

ParamRefs stage2_param_refs(TrainedModel& model) {
    Stage2Set set = stage2_set(model);
    return collect_refs(set.enc, nullptr, nullptr, set.fc, set.l2, set.sh);
}

void check_scene_compat(const ModelConfig& cfg, const Scene& scene) {
    const std::size_t T = scene.timesteps();
    if (T == 0) throw DataError("scene " + std::to_string(scene.id) + ": no timesteps");
    if (scene.persons.empty()) {
        throw DataError("scene " + std::to_string(scene.id) + ": no persons");
    }
    if (T != cfg.stage2_timesteps) {
        throw CompatError("scene " + std::to_string(scene.id) + " has " + std::to_string(T) +
                          " timesteps, model expects " + std::to_string(cfg.stage2_timesteps));
    }
    if (scene.persons.size() < cfg.pooling.groups) {
        throw DataError("scene " + std::to_string(scene.id) + ": " +
                        std::to_string(scene.persons.size()) + " persons for " +
                        std::to_string(cfg.pooling.groups) + " pooling groups");
    }
    for (const Tracklet& tr : scene.persons) {
        if (tr.obs.size() != T || tr.actions.size() != T || tr.bbox.size() != T) {
            throw DataError("scene " + std::to_string(scene.id) + ": tracklet length mismatch");
        }
        for (const Vec& o : tr.obs) {
            if (o.size() != cfg.obs_dim) {
                throw CompatError("scene " + std::to_string(scene.id) + " obs dim " +
                                  std::to_string(o.size()) + ", model expects " +
                                  std::to_string(cfg.obs_dim));
            }
        }
        for (std::size_t a : tr.actions) {
            if (a >= cfg.num_actions) {
                throw DataError("scene " + std::to_string(scene.id) + ": action label " +
                                std::to_string(a) + " out of range");
            }
        }
    }
    for (std::size_t g : scene.group_labels) {
        if (g >= cfg.num_activities) {
            throw DataError("scene " + std::to_string(scene.id) + ": activity label " +
                            std::to_string(g) + " out of range");
        }
    }
}

namespace {

SceneStats stage1_gradients_impl(const TrainedModel& model, const Scene& scene,
                                 GradBuffers* grads) {
    const ModelConfig& cfg = model.config;
    const VariantShape s = variant_shape(cfg.variant);
    if (!s.has_stage1_phase) {
        throw StateError(variant_name(cfg.variant) + " has no person-action stage");
    }
    const Encoder& enc = *model.params.encoder;
    const SoftmaxHead& head = *model.params.person_head;
    const std::size_t T = scene.timesteps();
    const std::size_t K = scene.persons.size();

    Encoder enc_grads = zero_encoder_like(enc);
    SoftmaxHead head_grads = zero_head(head.w.rows(), head.w.cols());
    LstmParams l1_grads;
    if (s.stage1_lstm) {
        l1_grads = zero_lstm_params(cfg.feature_dim, cfg.stage1_hidden);
    }

    SceneStats stats;
    const double person_weight = 1.0 / static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) {
        const Tracklet& tr = scene.persons[k];
        std::vector<EncTrace> traces(T);
        std::vector<Vec> feats(T);
        for (std::size_t t = 0; t < T; ++t) {
            traces[t] = encode_trace(enc, tr.obs[t]);
            feats[t] = traces[t].out;
        }
        std::vector<Vec> dfeats(T, Vec(cfg.feature_dim, 0.0));

        if (s.stage1_lstm) {
            const LstmParams& l1 = *model.params.stage1;
            const std::size_t W = cfg.stage1_timesteps;
            for (std::size_t t0 = 0; t0 < T; t0 += W) {
                const std::size_t len = std::min(W, T - t0);
                LstmTape tape = lstm_forward(l1, std::span<const Vec>(feats).subspan(t0, len));
                std::span<const std::size_t> labels(tr.actions.data() + t0, len);
                // Scale so the scene loss is the mean over all person-frames.
                const double scale = static_cast<double>(len) / static_cast<double>(K * T);
                BpttResult res = bptt(l1, head, tape, labels, LossMode::AllSteps, scale);
                stats.loss += res.loss;
                for (std::size_t t = 0; t < len; ++t) dfeats[t0 + t] = res.x_grads[t];
                ParamRefs dst = collect_refs(nullptr, &l1_grads, &head_grads, nullptr, nullptr,
                                             nullptr);
                ParamRefs src = collect_refs(nullptr, &res.param_grads, &res.head_grads, nullptr,
                                             nullptr, nullptr);
                for (std::size_t i = 0; i < dst.size(); ++i) {
                    for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
                }
                for (std::size_t t = 0; t < len; ++t) {
                    std::size_t pred = argmax_lowest(softmax_apply(head, tape.states[t].h));
                    if (pred == labels[t]) stats.correct++;
                    stats.total++;
                }
            }
        } else {
            HeadSequenceGrads res =
                head_sequence_backward(head, feats, tr.actions, person_weight);
            stats.loss += res.loss;
            ParamRefs dst = collect_refs(nullptr, nullptr, &head_grads, nullptr, nullptr, nullptr);
            ParamRefs src =
                collect_refs(nullptr, nullptr, &res.head_grads, nullptr, nullptr, nullptr);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
            }
            dfeats = std::move(res.input_grads);
            for (std::size_t t = 0; t < T; ++t) {
                std::size_t pred = argmax_lowest(softmax_apply(head, feats[t]));
                if (pred == tr.actions[t]) stats.correct++;
                stats.total++;
            }
        }

        for (std::size_t t = 0; t < T; ++t) {
            encoder_backward(enc, tr.obs[t], traces[t], dfeats[t], enc_grads);
        }
    }

    if (grads) {
        ParamRefs src = collect_refs(&enc_grads, s.stage1_lstm ? &l1_grads : nullptr, &head_grads,
                                     nullptr, nullptr, nullptr);
        add_refs_into(*grads, src);
    }
    return stats;
}

} // namespace

SceneStats stage1_scene_gradients(const TrainedModel& model, const Scene& scene,
                                  GradBuffers& grads) {
    return stage1_gradients_impl(model, scene, &grads);
}

namespace {

// Shared stage-2 forward/backward. When cached_zs is non-null the pooled
// sequence is taken as a frozen input (variants whose upstream was trained in
// stage 1); otherwise the encoder is part of the graph and receives
// gradients.
SceneStats stage2_gradients_impl(const TrainedModel& model, const Scene& scene,
                                 const std::vector<Vec>* cached_zs, GradBuffers* grads) {
    const ModelConfig& cfg = model.config;
    const VariantShape s = variant_shape(cfg.variant);
    const std::size_t T = scene.timesteps();
    const std::size_t K = scene.persons.size();
    const bool frozen_input = s.has_stage1_phase;
    const Encoder& enc = *model.params.encoder;
    const SoftmaxHead& head = *model.params.scene_head;

    // --- forward to the pooled sequence ---
    std::vector<Vec> zs;
    std::vector<std::vector<EncTrace>> traces;        // [person][t] (trainable-encoder variants)
    std::vector<std::vector<Vec>> reprs;              // [person][t]
    std::vector<std::vector<std::size_t>> perms;      // [t]
    std::vector<EncTrace> scene_traces;               // [t] (scene-level variants)
    std::vector<Vec> scene_obs;                       // [t]

    if (cached_zs) {
        zs = *cached_zs;
    } else if (frozen_input) {
        zs = scene_sequence(model, scene);
    } else if (s.scene_encoder) {
        scene_obs.resize(T);
        scene_traces.resize(T);
        zs.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            scene_obs[t] = scene_observation(scene, t);
            scene_traces[t] = encode_trace(enc, scene_obs[t]);
            zs[t] = scene_traces[t].out;
        }
    } else {
        traces.resize(K);
        reprs.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            traces[k].resize(T);
            reprs[k].resize(T);
            for (std::size_t t = 0; t < T; ++t) {
                traces[k][t] = encode_trace(enc, scene.persons[k].obs[t]);
                reprs[k][t] = traces[k][t].out;
            }
        }
        perms.resize(T);
        zs.resize(T);
        std::vector<Vec> ordered(K);
        for (std::size_t t = 0; t < T; ++t) {
            perms[t] = frame_order(scene, t);
            for (std::size_t i = 0; i < K; ++i) ordered[i] = reprs[perms[t][i]][t];
            zs[t] = scene_repr(ordered, cfg.pooling);
        }
    }

    // --- forward through fc / group LSTM / head ---
    std::vector<Vec> ins = zs;
    if (s.fc) {
        for (std::size_t t = 0; t < T; ++t) ins[t] = apply_fc(*model.params.fc, zs[t]);
    }

    SceneStats stats;
    std::vector<Vec> dz(T, Vec(zs[0].size(), 0.0));
    Encoder enc_grads;
    FcLayer fc_grads;
    LstmParams l2_grads;
    SoftmaxHead head_grads = zero_head(head.w.rows(), head.w.cols());
    if (!frozen_input && grads) enc_grads = zero_encoder_like(enc);
    if (s.fc && grads) fc_grads = zero_fc_like(*model.params.fc);

    if (s.stage2_lstm) {
        const LstmParams& l2 = *model.params.stage2;
        LstmTape tape = lstm_forward(l2, ins);
        BpttResult res =
            bptt(l2, head, tape, scene.group_labels, cfg.stage2_loss_mode, 1.0);
        stats.loss = res.loss;
        if (grads) {
            l2_grads = std::move(res.param_grads);
            head_grads = std::move(res.head_grads);
            // d loss / d ins
            if (s.fc) {
                for (std::size_t t = 0; t < T; ++t) {
                    add_outer(fc_grads.w, res.x_grads[t], zs[t]);
                    axpy(fc_grads.b, 1.0, res.x_grads[t]);
                    if (!frozen_input) dz[t] = matvec_t(model.params.fc->w, res.x_grads[t]);
                }
            } else {
                dz = std::move(res.x_grads);
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            std::size_t pred = argmax_lowest(softmax_apply(head, tape.states[t].h));
            if (pred == scene.group_labels[t]) stats.correct++;
            stats.total++;
        }
    } else {
        HeadSequenceGrads res = head_sequence_backward(head, ins, scene.group_labels, 1.0);
        stats.loss = res.loss;
        if (grads) {
            head_grads = std::move(res.head_grads);
            if (s.fc) {
                for (std::size_t t = 0; t < T; ++t) {
                    add_outer(fc_grads.w, res.input_grads[t], zs[t]);
                    axpy(fc_grads.b, 1.0, res.input_grads[t]);
                }
            } else {
                dz = std::move(res.input_grads);
            }
        }
        for (std::size_t t = 0; t < T; ++t) {
            std::size_t pred = argmax_lowest(softmax_apply(head, ins[t]));
            if (pred == scene.group_labels[t]) stats.correct++;
            stats.total++;
        }
    }

    if (!grads) return stats;

    // --- backward into the encoder where it trains in this stage ---
    if (!frozen_input) {
        if (s.scene_encoder) {
            for (std::size_t t = 0; t < T; ++t) {
                encoder_backward(enc, scene_obs[t], scene_traces[t], dz[t], enc_grads);
            }
        } else {
            std::vector<Vec> dperson(K, Vec(cfg.feature_dim, 0.0));
            std::vector<Vec> ordered(K);
            for (std::size_t t = 0; t < T; ++t) {
                for (auto& g : dperson) std::fill(g.begin(), g.end(), 0.0);
                for (std::size_t i = 0; i < K; ++i) ordered[i] = reprs[perms[t][i]][t];
                pool_route_backward(ordered, perms[t], cfg.pooling, dz[t], dperson);
                for (std::size_t k = 0; k < K; ++k) {
                    encoder_backward(enc, scene.persons[k].obs[t], traces[k][t], dperson[k],
                                     enc_grads);
                }
            }
        }
    }

    ParamRefs src = collect_refs(frozen_input ? nullptr : &enc_grads, nullptr, nullptr,
                                 s.fc ? &fc_grads : nullptr, s.stage2_lstm ? &l2_grads : nullptr,
                                 &head_grads);
    add_refs_into(*grads, src);
    return stats;
}

} // namespace

SceneStats stage2_scene_gradients(const TrainedModel& model, const Scene& scene,
                                  GradBuffers& grads) {
    return stage2_gradients_impl(model, scene, nullptr, &grads);
}

double stage1_scene_loss(const TrainedModel& model, const Scene& scene) {
    return stage1_gradients_impl(model, scene, nullptr).loss;
}

double stage2_scene_loss(const TrainedModel& model, const Scene& scene) {
    return stage2_gradients_impl(model, scene, nullptr, nullptr).loss;
}

std::vector<EpochLog> train_stage1(TrainedModel& model, std::span<const Scene> scenes,
                                   const TrainHyper& hyper) {
    const VariantShape s = variant_shape(model.config.variant);
    if (!s.has_stage1_phase) {
        throw StateError(variant_name(model.config.variant) + " has no person-action stage");
    }
    if (scenes.empty()) throw DataError("train_stage1: no scenes");
    for (const Scene& sc : scenes) check_scene_compat(model.config, sc);

    ParamRefs params = stage1_param_refs(model);
    auto batch_fn = [&](std::span<const std::size_t> idx, GradBuffers& grads) {
        BatchStats bs;
        for (std::size_t i : idx) {
            SceneStats st = stage1_scene_gradients(model, scenes[i], grads);
            bs.loss_sum += st.loss;
            bs.correct += st.correct;
            bs.total += st.total;
        }
        return bs;
    };
    auto log = run_epochs(scenes.size(), hyper, params, batch_fn, "stage1");
    model.stage1_done = true;
    return log;
}

std::vector<EpochLog> train_stage2(TrainedModel& model, std::span<const Scene> scenes,
                                   const TrainHyper& hyper) {
    const VariantShape s = variant_shape(model.config.variant);
    if (s.has_stage1_phase && !model.stage1_done) {
        throw StateError("stage-2 training requires a completed stage 1 for " +
                         variant_name(model.config.variant));
    }
    if (scenes.empty()) throw DataError("train_stage2: no scenes");
    for (const Scene& sc : scenes) check_scene_compat(model.config, sc);

    // With stage 1 frozen the pooled sequences never change; compute once.
    std::vector<std::vector<Vec>> cached;
    if (s.has_stage1_phase) {
        cached.reserve(scenes.size());
        for (const Scene& sc : scenes) cached.push_back(scene_sequence(model, sc));
    }

    ParamRefs params = stage2_param_refs(model);
    auto batch_fn = [&](std::span<const std::size_t> idx, GradBuffers& grads) {
        BatchStats bs;
        for (std::size_t i : idx) {
            SceneStats st = stage2_gradients_impl(model, scenes[i],
                                                  cached.empty() ? nullptr : &cached[i], &grads);
            bs.loss_sum += st.loss;
            bs.correct += st.correct;
            bs.total += st.total;
        }
        return bs;
    };
    auto log = run_epochs(scenes.size(), hyper, params, batch_fn, "stage2");
    model.stage2_done = true;
    return log;
}

Prediction predict(const TrainedModel& model, const Scene& scene) {
    const ModelConfig& cfg = model.config;
    const VariantShape s = variant_shape(cfg.variant);
    if (!model.stage2_done || (s.has_stage1_phase && !model.stage1_done)) {
        throw StateError("predict on a model with untrained stages");
    }
    check_scene_compat(cfg, scene);

    Prediction pred;
    std::vector<Vec> zs = scene_sequence(model, scene);
    std::vector<Vec> ins = zs;
    if (s.fc) {
        for (auto& z : ins) z = apply_fc(*model.params.fc, z);
    }
    const std::size_t T = scene.timesteps();
    pred.group_dists.resize(T);
    if (s.stage2_lstm) {
        LstmTape tape = lstm_forward(*model.params.stage2, ins);
        for (std::size_t t = 0; t < T; ++t) {
            pred.group_dists[t] = softmax_apply(*model.params.scene_head, tape.states[t].h);
        }
    } else {
        for (std::size_t t = 0; t < T; ++t) {
            pred.group_dists[t] = softmax_apply(*model.params.scene_head, ins[t]);
        }
    }
    Vec mean(cfg.num_activities, 0.0);
    for (const Vec& d : pred.group_dists) axpy(mean, 1.0, d);
    pred.group_label = argmax_lowest(mean);

    if (s.person_head) {
        const Encoder& enc = *model.params.encoder;
        pred.person_actions.resize(scene.persons.size());
        for (std::size_t k = 0; k < scene.persons.size(); ++k) {
            std::vector<Vec> feats(T);
            for (std::size_t t = 0; t < T; ++t) {
                feats[t] = encode(enc, scene.persons[k].obs[t]);
            }
            std::vector<Vec> inputs = s.stage1_lstm
                ? person_hidden_states(*model.params.stage1, feats, cfg.stage1_timesteps)
                : std::move(feats);
            pred.person_actions[k].resize(T);
            for (std::size_t t = 0; t < T; ++t) {
                pred.person_actions[k][t] =
                    argmax_lowest(softmax_apply(*model.params.person_head, inputs[t]));
            }
        }
    }
    return pred;
}

std::size_t argmax_lowest(const Vec& v) {
    if (v.empty()) throw DomainError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

Metrics evaluate(const TrainedModel& model, std::span<const Scene> scenes) {
    if (scenes.empty()) throw DomainError("evaluate: empty scene set");
    const ModelConfig& cfg = model.config;
    const VariantShape s = variant_shape(cfg.variant);

    Metrics m;
    m.confusion.assign(cfg.num_activities, std::vector<std::size_t>(cfg.num_activities, 0));
    std::size_t frame_correct = 0, scene_correct = 0;
    std::size_t action_correct = 0, action_total = 0;

    for (const Scene& scene : scenes) {
        Prediction pred = predict(model, scene);
        for (std::size_t t = 0; t < scene.timesteps(); ++t) {
            std::size_t truth = scene.group_labels[t];
            std::size_t guess = argmax_lowest(pred.group_dists[t]);
            m.confusion[truth][guess]++;
            if (truth == guess) frame_correct++;
            m.num_frames++;
        }
        // Scene-level truth: modal per-frame label, lowest index on ties.
        Vec counts(cfg.num_activities, 0.0);
        for (std::size_t g : scene.group_labels) counts[g] += 1.0;
        if (argmax_lowest(counts) == pred.group_label) scene_correct++;
        m.num_scenes++;

        if (s.person_head) {
            for (std::size_t k = 0; k < scene.persons.size(); ++k) {
                for (std::size_t t = 0; t < scene.timesteps(); ++t) {
                    if (pred.person_actions[k][t] == scene.persons[k].actions[t]) {
                        action_correct++;
                    }
                    action_total++;
                }
            }
        }
    }

    m.frame_accuracy = static_cast<double>(frame_correct) / static_cast<double>(m.num_frames);
    m.scene_accuracy = static_cast<double>(scene_correct) / static_cast<double>(m.num_scenes);
    m.per_class_accuracy.resize(cfg.num_activities, 0.0);
    for (std::size_t c = 0; c < cfg.num_activities; ++c) {
        std::size_t row = 0;
        for (std::size_t j = 0; j < cfg.num_activities; ++j) row += m.confusion[c][j];
        m.per_class_accuracy[c] =
            row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
    }
    if (s.person_head && action_total > 0) {
        m.person_action_accuracy =
            static_cast<double>(action_correct) / static_cast<double>(action_total);
    }
    return m;
}

} // namespace gar
