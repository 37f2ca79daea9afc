#include <doctest.h>

#include <cmath>

#include "gar/trainer.hpp"

using namespace gar;

TEST_SUITE_BEGIN("trainer");

TEST_CASE("plain SGD when momentum is zero") {
    Vec p{1.0, 2.0};
    ParamRefs refs{std::span<double>(p)};
    Velocity vel(refs);
    GradBuffers g{{0.5, -1.0}};
    sgd_momentum_step(refs, g, vel, 0.1, 0.0);
    CHECK(p[0] == 1.0 - 0.1 * 0.5);
    CHECK(p[1] == 2.0 + 0.1 * 1.0);
}

TEST_CASE("zero gradient with zero velocity is a fixed point") {
    Vec p{3.0, -4.0};
    Vec before = p;
    ParamRefs refs{std::span<double>(p)};
    Velocity vel(refs);
    GradBuffers g{{0.0, 0.0}};
    for (int i = 0; i < 5; ++i) sgd_momentum_step(refs, g, vel, 0.1, 0.9);
    CHECK(p == before);
}

TEST_CASE("two momentum steps match the unrolled recurrence exactly") {
    // v1 = -lr g, p1 = p0 - lr g; v2 = mu v1 - lr g, p2 = p1 + v2
    // total displacement = -(1 + (1 + mu)) ... with lr=1: -(1 + 1.9) g
    Vec p{0.0};
    ParamRefs refs{std::span<double>(p)};
    Velocity vel(refs);
    GradBuffers g{{2.0}};
    sgd_momentum_step(refs, g, vel, 1.0, 0.9);
    sgd_momentum_step(refs, g, vel, 1.0, 0.9);
    CHECK(p[0] == -(1.0 + 1.9) * 2.0); // bitwise: all operations are exact here
}

TEST_CASE("shape mismatches are rejected") {
    Vec p{1.0, 2.0};
    ParamRefs refs{std::span<double>(p)};
    Velocity vel(refs);
    GradBuffers wrong{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(sgd_momentum_step(refs, wrong, vel, 0.1, 0.9), ShapeError);
    GradBuffers too_many{{1.0, 2.0}, {3.0}};
    CHECK_THROWS_AS(sgd_momentum_step(refs, too_many, vel, 0.1, 0.9), ShapeError);
}

TEST_CASE("global norm clipping") {
    GradBuffers g{{3.0, 0.0}, {0.0, 4.0}}; // norm 5
    double norm = clip_global_norm(g, 2.5);
    CHECK(norm == doctest::Approx(5.0));
    double after = std::sqrt(g[0][0] * g[0][0] + g[1][1] * g[1][1]);
    CHECK(after == doctest::Approx(2.5).epsilon(1e-12));

    GradBuffers small{{0.3, 0.4}}; // norm 0.5, below the clip
    GradBuffers copy = small;
    clip_global_norm(small, 2.5);
    CHECK(small == copy);
}

TEST_CASE("run_epochs honors max_epochs zero and determinism") {
    Vec p{1.0};
    auto batch_fn = [&](std::span<const std::size_t>, GradBuffers& g) {
        g[0][0] += 2.0 * p[0]; // d/dp of p^2, one scene
        BatchStats s;
        s.loss_sum = p[0] * p[0];
        s.total = 1;
        s.correct = 0;
        return s;
    };
    TrainHyper hyper;
    hyper.max_epochs = 0;
    auto log = run_epochs(1, hyper, {std::span<double>(p)}, batch_fn, "test");
    CHECK(log.empty());
    CHECK(p[0] == 1.0);

    hyper.max_epochs = 10;
    hyper.learning_rate = 0.1;
    hyper.momentum = 0.0;
    Vec p1{1.0};
    Vec p2{1.0};
    std::vector<EpochLog> l1, l2;
    {
        Vec* cur = &p1;
        auto fn = [&](std::span<const std::size_t>, GradBuffers& g) {
            g[0][0] += 2.0 * (*cur)[0];
            BatchStats s;
            s.loss_sum = (*cur)[0] * (*cur)[0];
            s.total = 1;
            return s;
        };
        l1 = run_epochs(1, hyper, {std::span<double>(p1)}, fn, "test");
        cur = &p2;
        l2 = run_epochs(1, hyper, {std::span<double>(p2)}, fn, "test");
    }
    CHECK(p1[0] == p2[0]);
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) {
        CHECK(l1[i].loss == l2[i].loss);
        CHECK(l1[i].accuracy == l2[i].accuracy);
    }
}

TEST_CASE("loss decreases on a one-sample quadratic") {
    Vec p{5.0};
    auto batch_fn = [&](std::span<const std::size_t>, GradBuffers& g) {
        g[0][0] += 2.0 * p[0];
        BatchStats s;
        s.loss_sum = p[0] * p[0];
        s.total = 1;
        return s;
    };
    TrainHyper hyper;
    hyper.max_epochs = 50;
    hyper.learning_rate = 1e-3;
    hyper.momentum = 0.0;
    auto log = run_epochs(1, hyper, {std::span<double>(p)}, batch_fn, "descent");
    int violations = 0;
    for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i].loss > log[i - 1].loss) violations++;
    }
    CHECK(violations <= 2);
    CHECK(log.back().loss < log.front().loss);
}

TEST_CASE("non-finite loss aborts with epoch and batch in the message") {
    Vec p{1.0};
    auto batch_fn = [&](std::span<const std::size_t>, GradBuffers&) {
        BatchStats s;
        s.loss_sum = std::numeric_limits<double>::quiet_NaN();
        s.total = 1;
        return s;
    };
    TrainHyper hyper;
    hyper.max_epochs = 3;
    CHECK_THROWS_WITH_AS(run_epochs(1, hyper, {std::span<double>(p)}, batch_fn, "boom"),
                         doctest::Contains("epoch 0"), Error);
}

TEST_CASE("early stopping halts on a plateau") {
    Vec p{0.0};
    auto batch_fn = [&](std::span<const std::size_t>, GradBuffers&) {
        BatchStats s;
        s.loss_sum = 1.0; // never improves
        s.total = 1;
        return s;
    };
    TrainHyper hyper;
    hyper.max_epochs = 100;
    hyper.early_stop = EarlyStop{5, 1e-6};
    auto log = run_epochs(1, hyper, {std::span<double>(p)}, batch_fn, "plateau");
    CHECK(log.size() <= 6);
}

TEST_CASE("empty training set is rejected") {
    TrainHyper hyper;
    auto batch_fn = [](std::span<const std::size_t>, GradBuffers&) { return BatchStats{}; };
    CHECK_THROWS_AS(run_epochs(0, hyper, {}, batch_fn, "none"), DomainError);
}

TEST_CASE("log rows serialize without wall time") {
    std::vector<EpochLog> log{{0, 0.5, 0.25, 123.0}, {1, 0.25, 0.5, 456.0}};
    std::string text;
    append_log_rows(text, "stage1_train", log);
    CHECK(text == "stage1_train\t0\t0.5\t0.25\nstage1_train\t1\t0.25\t0.5\n");
}

TEST_SUITE_END();
