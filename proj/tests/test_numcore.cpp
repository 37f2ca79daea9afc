#include <doctest.h>

#include <cmath>

#include "gar/numcore.hpp"

using namespace gar;

TEST_SUITE_BEGIN("numcore");

TEST_CASE("sigmoid closed-form values") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(std::abs(sigmoid(40.0) - 1.0) < 1e-15);
    CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
    // stable and strictly inside (0,1) far into the tails
    CHECK(std::abs(sigmoid(700.0) - 1.0) < 1e-15);
    CHECK(sigmoid(700.0) < 1.0);
    CHECK(sigmoid(-700.0) > 0.0);
    CHECK(std::isfinite(sigmoid(-700.0)));
}

TEST_CASE("tanh activation") {
    CHECK(tanh_act(0.0) == 0.0);
    CHECK(std::abs(tanh_act(40.0) - 1.0) < 1e-15);
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        double x = rng.uniform(-5, 5);
        CHECK(tanh_act(-x) == doctest::Approx(-tanh_act(x)).epsilon(1e-15));
    }
}

TEST_CASE("sigmoid and tanh stay strictly inside their ranges") {
    Rng rng(42);
    for (int i = 0; i < 100000; ++i) {
        double x = rng.uniform(-1e3, 1e3);
        double s = sigmoid(x);
        double t = tanh_act(x);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        CHECK(t > -1.0);
        CHECK(t < 1.0);
    }
}

TEST_CASE("matvec basics") {
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    Vec v{1, 2, 3};
    CHECK(matvec(eye, v) == v);

    Matrix zero(2, 3);
    CHECK(matvec(zero, v) == Vec{0, 0});

    Matrix m(2, 2);
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(1, 0) = 3;
    m(1, 1) = 4;
    CHECK(matvec(m, Vec{1, 1}) == Vec{3, 7});

    CHECK_THROWS_AS(matvec(m, Vec{1, 2, 3}), ShapeError);
    CHECK_THROWS_WITH_AS(matvec(m, Vec{1, 2, 3}), doctest::Contains("2"), ShapeError);
}

TEST_CASE("matvec is linear") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(5);
        Matrix m = init_uniform(rows, cols, 1.0, rng);
        Vec u(cols), v(cols);
        for (auto& x : u) x = rng.uniform(-1, 1);
        for (auto& x : v) x = rng.uniform(-1, 1);
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        Vec combo(cols);
        for (std::size_t i = 0; i < cols; ++i) combo[i] = a * u[i] + b * v[i];
        Vec lhs = matvec(m, combo);
        Vec mu = matvec(m, u), mv = matvec(m, v);
        for (std::size_t i = 0; i < rows; ++i) {
            CHECK(lhs[i] == doctest::Approx(a * mu[i] + b * mv[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("matvec_t matches the transpose product") {
    Rng rng(6);
    Matrix m = init_uniform(3, 4, 1.0, rng);
    Vec v{0.5, -1.0, 2.0};
    Vec got = matvec_t(m, v);
    for (std::size_t c = 0; c < 4; ++c) {
        double want = 0;
        for (std::size_t r = 0; r < 3; ++r) want += m(r, c) * v[r];
        CHECK(got[c] == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("init_uniform rejects non-positive scale") {
    Rng rng(1);
    CHECK_THROWS_AS(init_uniform(2, 2, 0.0, rng), DomainError);
    CHECK_THROWS_AS(init_uniform(2, 2, -1.0, rng), DomainError);
    CHECK_THROWS_AS(Matrix(0, 3), ShapeError);
}

TEST_CASE("init_uniform is deterministic in the seed") {
    Rng a(99), b(99);
    Matrix ma = init_uniform(4, 5, 0.3, a);
    Matrix mb = init_uniform(4, 5, 0.3, b);
    CHECK(ma == mb);
}

TEST_CASE("init_uniform sample mean matches the uniform law") {
    Rng rng(123);
    const double scale = 0.5;
    Matrix m = init_uniform(1000, 1000, scale, rng);
    double sum = 0;
    for (double x : m.data()) {
        sum += x;
        CHECK(x >= -scale);
        CHECK(x <= scale);
    }
    double mean = sum / 1e6;
    // std of the mean is scale/sqrt(3e6); allow three sigma
    CHECK(std::abs(mean) < 3.0 * scale / std::sqrt(3e6));
}

TEST_CASE("rng streams are reproducible and forks are stable") {
    Rng a(2024), b(2024);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng base(7);
    Rng f1 = base.fork(3);
    Rng f2 = base.fork(3);
    CHECK(f1.next_u64() == f2.next_u64());
    // forking does not advance the parent
    Rng base2(7);
    (void)base2.fork(1);
    Rng base3(7);
    CHECK(base2.next_u64() == base3.next_u64());

    for (int i = 0; i < 1000; ++i) {
        double d = base.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
        CHECK(base.below(10) < 10);
    }
}

TEST_CASE("gaussian draws have roughly standard moments") {
    Rng rng(55);
    double sum = 0, sq = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_SUITE_END();
