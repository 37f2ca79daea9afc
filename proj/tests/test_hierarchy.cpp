#include <doctest.h>

#include <cmath>

#include "gar/checkpoint.hpp"
#include "gar/gradcheck.hpp"
#include "gar/hierarchy.hpp"
#include "gar/scenegen.hpp"

using namespace gar;

namespace {

ModelConfig small_config(ModelVariant v) {
    ModelConfig cfg;
    cfg.obs_dim = 4;
    cfg.encoder_hidden = 6;
    cfg.feature_dim = 5;
    cfg.stage1_hidden = 4;
    cfg.stage1_timesteps = 2;
    cfg.stage2_hidden = 4;
    cfg.stage2_timesteps = 4;
    cfg.fc_dim = 6;
    cfg.pooling = {PoolStrategy::Max, 2};
    cfg.num_actions = 3;
    cfg.num_activities = 3;
    cfg.variant = v;
    cfg.init_seed = 5;
    return cfg;
}

TaskSpec small_task() {
    TaskSpec spec;
    spec.rule = LabelRule::Majority;
    spec.num_actions = 3;
    spec.num_activities = 3;
    spec.persons_min = spec.persons_max = 3;
    spec.timesteps = 4;
    spec.obs_dim = 4;
    spec.latent_modes = 3;
    spec.noise_sigma = 0.05;
    spec.seed = 55;
    return spec;
}

std::vector<Scene> some_scenes(const TaskSpec& spec, std::size_t n) {
    std::vector<Scene> out;
    for (std::uint64_t id = 0; id < n; ++id) out.push_back(generate_scene(spec, id));
    return out;
}

// order-independent snapshot of every parameter value
std::vector<Vec> snapshot(const ModelParams& p) {
    std::vector<Vec> out;
    auto push_mat = [&](const Matrix& m) { out.push_back(m.data()); };
    auto push_vec = [&](const Vec& v) { out.push_back(v); };
    if (p.encoder) {
        push_mat(p.encoder->w1);
        push_vec(p.encoder->b1);
        push_mat(p.encoder->w2);
        push_vec(p.encoder->b2);
    }
    if (p.stage1) {
        for (const Matrix* m : {&p.stage1->w_xi, &p.stage1->w_hi, &p.stage1->w_xf,
                                &p.stage1->w_hf, &p.stage1->w_xo, &p.stage1->w_ho,
                                &p.stage1->w_xc, &p.stage1->w_hc}) {
            push_mat(*m);
        }
        push_vec(p.stage1->b_i);
        push_vec(p.stage1->b_f);
        push_vec(p.stage1->b_o);
        push_vec(p.stage1->b_c);
    }
    if (p.person_head) {
        push_mat(p.person_head->w);
        push_vec(p.person_head->b);
    }
    return out;
}

} // namespace

TEST_SUITE_BEGIN("hierarchy");

TEST_CASE("each variant owns exactly the advertised sub-networks") {
    struct Expect {
        ModelVariant v;
        bool stage1, person_head, fc, stage2;
    };
    const Expect table[] = {
        {ModelVariant::Full, true, true, true, true},
        {ModelVariant::B1, false, false, false, false},
        {ModelVariant::B2, false, false, false, false},
        {ModelVariant::B3, false, true, false, false},
        {ModelVariant::B4, false, false, false, true},
        {ModelVariant::B5, false, false, false, true},
        {ModelVariant::B6, false, true, true, true},
        {ModelVariant::B7, true, true, true, false},
    };
    for (const Expect& e : table) {
        ModelConfig cfg = small_config(e.v);
        if (e.v == ModelVariant::B1 || e.v == ModelVariant::B4) cfg.pooling.groups = 1;
        TrainedModel m = build_model(cfg);
        CAPTURE(variant_name(e.v));
        CHECK(m.params.encoder.has_value());
        CHECK(m.params.scene_head.has_value());
        CHECK(m.params.stage1.has_value() == e.stage1);
        CHECK(m.params.person_head.has_value() == e.person_head);
        CHECK(m.params.fc.has_value() == e.fc);
        CHECK(m.params.stage2.has_value() == e.stage2);
    }
}

TEST_CASE("concatenation arithmetic fixes the layer widths") {
    ModelConfig cfg = small_config(ModelVariant::Full);
    cfg.feature_dim = 32;
    cfg.stage1_hidden = 16;
    cfg.pooling = {PoolStrategy::Max, 2};
    TrainedModel m = build_model(cfg);
    // P = x (+) h is 48-dim; two sub-groups concatenate to 96
    CHECK(m.params.fc->w.cols() == 96);
    CHECK(m.params.fc->w.rows() == cfg.fc_dim);
    CHECK(m.params.stage2->input_dim == cfg.fc_dim);
    CHECK(m.params.person_head->w.cols() == 16);
    CHECK(m.params.scene_head->w.cols() == cfg.stage2_hidden);
}

TEST_CASE("scene-level variants reject multi-group pooling") {
    for (ModelVariant v : {ModelVariant::B1, ModelVariant::B4}) {
        ModelConfig cfg = small_config(v);
        cfg.pooling.groups = 2;
        CHECK_THROWS_AS(build_model(cfg), ConfigError);
        cfg.pooling.groups = 1;
        CHECK_NOTHROW(build_model(cfg));
    }
}

TEST_CASE("person hidden states reset at window boundaries") {
    Rng rng(17);
    LstmParams p = init_lstm_params(3, 4, rng);
    std::vector<Vec> xs(5);
    for (auto& x : xs) {
        x = Vec{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    std::vector<Vec> hs = person_hidden_states(p, xs, 2);
    REQUIRE(hs.size() == 5);
    LstmTape w1 = lstm_forward(p, std::span<const Vec>(xs.data(), 2));
    LstmTape w2 = lstm_forward(p, std::span<const Vec>(xs.data() + 2, 2));
    LstmTape w3 = lstm_forward(p, std::span<const Vec>(xs.data() + 4, 1));
    CHECK(hs[0] == w1.states[0].h);
    CHECK(hs[1] == w1.states[1].h);
    CHECK(hs[2] == w2.states[0].h);
    CHECK(hs[3] == w2.states[1].h);
    CHECK(hs[4] == w3.states[0].h);
}

TEST_CASE("scene observation is the mean over persons") {
    TaskSpec spec = small_task();
    Scene s = generate_scene(spec, 0);
    Vec mean = scene_observation(s, 1);
    for (std::size_t j = 0; j < spec.obs_dim; ++j) {
        double want = 0;
        for (const Tracklet& tr : s.persons) want += tr.obs[1][j];
        want /= static_cast<double>(s.persons.size());
        CHECK(mean[j] == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("stage ordering and lifecycle are enforced") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 4);
    TrainHyper hyper;
    hyper.max_epochs = 1;

    TrainedModel full = build_model(small_config(ModelVariant::Full));
    CHECK_THROWS_AS(train_stage2(full, scenes, hyper), StateError);
    CHECK_THROWS_AS(predict(full, scenes[0]), StateError);

    TrainedModel b2 = build_model(small_config(ModelVariant::B2));
    CHECK_THROWS_AS(train_stage1(b2, scenes, hyper), StateError);
    CHECK_NOTHROW(train_stage2(b2, scenes, hyper));
    CHECK_NOTHROW(predict(b2, scenes[0]));
}

TEST_CASE("scene compatibility checks name the offender") {
    ModelConfig cfg = small_config(ModelVariant::Full);
    TaskSpec spec = small_task();
    Scene good = generate_scene(spec, 0);
    CHECK_NOTHROW(check_scene_compat(cfg, good));

    Scene wrong_dim = good;
    wrong_dim.persons[0].obs[0].push_back(1.0);
    CHECK_THROWS_AS(check_scene_compat(cfg, wrong_dim), CompatError);

    Scene bad_label = good;
    bad_label.group_labels[0] = 7;
    CHECK_THROWS_AS(check_scene_compat(cfg, bad_label), DataError);

    Scene bad_action = good;
    bad_action.persons[0].actions[0] = 9;
    CHECK_THROWS_AS(check_scene_compat(cfg, bad_action), DataError);

    Scene short_scene = good;
    short_scene.group_labels.pop_back();
    CHECK_THROWS_AS(check_scene_compat(cfg, short_scene), Error);

    ModelConfig many_groups = cfg;
    many_groups.pooling.groups = 4; // scenes only have 3 people
    CHECK_THROWS_AS(check_scene_compat(many_groups, good), DataError);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 4);
    TrainedModel model = build_model(small_config(ModelVariant::Full));
    auto before = snapshot(model.params);
    TrainHyper hyper;
    hyper.max_epochs = 3;
    hyper.learning_rate = 0.0;
    train_stage1(model, scenes, hyper);
    CHECK(snapshot(model.params) == before);
}

TEST_CASE("stage-1 components stay frozen through stage-2 training") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 6);
    TrainedModel model = build_model(small_config(ModelVariant::Full));
    TrainHyper hyper;
    hyper.max_epochs = 3;
    hyper.learning_rate = 0.05;
    train_stage1(model, scenes, hyper);
    auto frozen = snapshot(model.params); // encoder + stage1 + person head
    auto fc_before = model.params.fc->w;
    train_stage2(model, scenes, hyper);
    CHECK(snapshot(model.params) == frozen);
    CHECK(model.params.fc->w != fc_before); // stage-2 components did move
}

TEST_CASE("training runs are deterministic given seeds") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 6);
    TrainHyper hyper;
    hyper.max_epochs = 4;
    hyper.learning_rate = 0.05;
    hyper.shuffle_seed = 99;

    TrainedModel a = build_model(small_config(ModelVariant::Full));
    TrainedModel b = build_model(small_config(ModelVariant::Full));
    auto la1 = train_stage1(a, scenes, hyper);
    auto lb1 = train_stage1(b, scenes, hyper);
    auto la2 = train_stage2(a, scenes, hyper);
    auto lb2 = train_stage2(b, scenes, hyper);
    CHECK(a == b);
    REQUIRE(la1.size() == lb1.size());
    for (std::size_t i = 0; i < la1.size(); ++i) CHECK(la1[i].loss == lb1[i].loss);
    for (std::size_t i = 0; i < la2.size(); ++i) CHECK(la2[i].loss == lb2[i].loss);

    Metrics ma = evaluate(a, scenes);
    Metrics mb = evaluate(b, scenes);
    CHECK(ma.frame_accuracy == mb.frame_accuracy);
    CHECK(ma.confusion == mb.confusion);
}

TEST_CASE("the full model overfits a tiny separable set") {
    TaskSpec spec;
    spec.rule = LabelRule::Majority;
    spec.num_actions = 3;
    spec.num_activities = 3;
    spec.persons_min = spec.persons_max = 3;
    spec.timesteps = 6;
    spec.obs_dim = 6;
    spec.latent_modes = 3;
    spec.noise_sigma = 0.02;
    spec.seed = 111;
    auto scenes = some_scenes(spec, 8);

    ModelConfig cfg;
    cfg.obs_dim = 6;
    cfg.encoder_hidden = 16;
    cfg.feature_dim = 8;
    cfg.stage1_hidden = 8;
    cfg.stage1_timesteps = 3;
    cfg.stage2_hidden = 8;
    cfg.stage2_timesteps = 6;
    cfg.fc_dim = 16;
    cfg.pooling = {PoolStrategy::Max, 1};
    cfg.num_actions = 3;
    cfg.num_activities = 3;
    cfg.variant = ModelVariant::Full;
    cfg.init_seed = 112;

    TrainedModel model = build_model(cfg);
    TrainHyper hyper;
    hyper.learning_rate = 0.05;
    hyper.momentum = 0.9;
    hyper.batch_size = 8;
    hyper.max_epochs = 500;
    hyper.clip_norm = 5.0;
    hyper.shuffle_seed = 113;

    auto log1 = train_stage1(model, scenes, hyper);
    CHECK(log1.back().accuracy >= 0.99);
    auto log2 = train_stage2(model, scenes, hyper);
    CHECK(log2.back().accuracy >= 0.99);

    Metrics m = evaluate(model, scenes);
    CHECK(m.frame_accuracy >= 0.99);
    CHECK(m.scene_accuracy == 1.0);
    REQUIRE(m.person_action_accuracy.has_value());
    CHECK(*m.person_action_accuracy >= 0.99);

    // memorized scenes keep their labels through predict
    for (const Scene& s : scenes) {
        CHECK(predict(model, s).group_label == s.group_labels[0]);
    }

    // all-correct predictions give an identity-structured confusion matrix
    for (std::size_t r = 0; r < m.confusion.size(); ++r) {
        for (std::size_t c = 0; c < m.confusion[r].size(); ++c) {
            if (r != c) CHECK(m.confusion[r][c] == 0);
        }
    }
}

TEST_CASE("accuracy equals the confusion matrix trace over its total") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 10);
    TrainedModel model = build_model(small_config(ModelVariant::B2));
    TrainHyper hyper;
    hyper.max_epochs = 2;
    train_stage2(model, scenes, hyper);

    Metrics m = evaluate(model, scenes);
    std::size_t trace = 0, total = 0;
    for (std::size_t r = 0; r < m.confusion.size(); ++r) {
        for (std::size_t c = 0; c < m.confusion[r].size(); ++c) {
            total += m.confusion[r][c];
            if (r == c) trace += m.confusion[r][c];
        }
    }
    CHECK(total == m.num_frames);
    CHECK(m.frame_accuracy ==
          doctest::Approx(static_cast<double>(trace) / static_cast<double>(total)));

    // confusion row sums equal the per-class frame counts
    std::vector<std::size_t> per_class(3, 0);
    for (const Scene& s : scenes) {
        for (std::size_t g : s.group_labels) per_class[g]++;
    }
    for (std::size_t r = 0; r < 3; ++r) {
        std::size_t row = 0;
        for (std::size_t c = 0; c < 3; ++c) row += m.confusion[r][c];
        CHECK(row == per_class[r]);
    }

    CHECK_THROWS_AS(evaluate(model, std::span<const Scene>{}), DomainError);
}

TEST_CASE("uniform scene head predicts class zero by the tie rule") {
    TaskSpec spec = small_task();
    Scene scene = generate_scene(spec, 2);
    TrainedModel model = build_model(small_config(ModelVariant::B2));
    model.params.scene_head = zero_head(3, model.params.scene_head->w.cols());
    model.stage2_done = true;
    Prediction pred = predict(model, scene);
    CHECK(pred.group_label == 0);
    for (const Vec& dist : pred.group_dists) {
        for (double v : dist) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("prediction ignores storage order and within-group swaps under max pooling") {
    TaskSpec spec = small_task();
    spec.persons_min = spec.persons_max = 4;
    auto scenes = some_scenes(spec, 6);
    ModelConfig cfg = small_config(ModelVariant::Full);
    cfg.pooling = {PoolStrategy::Max, 2};
    TrainedModel model = build_model(cfg);
    TrainHyper hyper;
    hyper.max_epochs = 3;
    train_stage1(model, scenes, hyper);
    train_stage2(model, scenes, hyper);

    Scene scene = scenes[0];
    Prediction base = predict(model, scene);

    // permute the storage order; bbox keys travel with their persons
    Scene shuffled = scene;
    std::swap(shuffled.persons[0], shuffled.persons[3]);
    std::swap(shuffled.persons[1], shuffled.persons[2]);
    Prediction permuted = predict(model, shuffled);
    CHECK(permuted.group_label == base.group_label);
    CHECK(permuted.group_dists == base.group_dists);

    // swap bbox keys between two members of the same sub-group
    std::vector<OrderKey> keys(scene.persons.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        keys[k] = {scene.persons[k].bbox[0].first, scene.persons[k].bbox[0].second, k};
    }
    auto perm = order_people(keys);
    Scene swapped = scene; // persons perm[0] and perm[1] share group 1 of 2
    std::swap(swapped.persons[perm[0]].bbox, swapped.persons[perm[1]].bbox);
    Prediction swapped_pred = predict(model, swapped);
    CHECK(swapped_pred.group_dists == base.group_dists);
}

TEST_CASE("all eight variants train end to end") {
    TaskSpec spec = small_task();
    auto scenes = some_scenes(spec, 6);
    TrainHyper hyper;
    hyper.max_epochs = 2;
    for (ModelVariant v : {ModelVariant::Full, ModelVariant::B1, ModelVariant::B2,
                           ModelVariant::B3, ModelVariant::B4, ModelVariant::B5, ModelVariant::B6,
                           ModelVariant::B7}) {
        CAPTURE(variant_name(v));
        ModelConfig cfg = small_config(v);
        if (v == ModelVariant::B1 || v == ModelVariant::B4) cfg.pooling.groups = 1;
        TrainedModel model = build_model(cfg);
        if (variant_shape(v).has_stage1_phase) {
            CHECK_NOTHROW(train_stage1(model, scenes, hyper));
        }
        CHECK_NOTHROW(train_stage2(model, scenes, hyper));
        Metrics m = evaluate(model, scenes);
        CHECK(m.num_scenes == 6);
        bool expect_person = variant_shape(v).person_head;
        CHECK(m.person_action_accuracy.has_value() == expect_person);
    }
}

TEST_CASE("gradcheck passes and the corruption hook trips it") {
    auto results = run_gradcheck(3);
    CHECK(all_pass(results));
    CHECK(results.size() == 7);

    auto corrupted = run_gradcheck(1, "fc");
    bool fc_failed = false;
    for (const auto& r : corrupted) {
        if (r.group == "fc") fc_failed = !r.pass;
    }
    CHECK(fc_failed);
}

TEST_SUITE_END();
