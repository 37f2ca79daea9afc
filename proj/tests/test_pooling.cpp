#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gar/pooling.hpp"

using namespace gar;

namespace {

Vec random_vec(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (auto& x : v) x = rng.uniform(-2, 2);
    return v;
}

} // namespace

TEST_SUITE_BEGIN("pooling");

TEST_CASE("person concatenation") {
    CHECK(concat_person(Vec{1, 2}, Vec{3}) == Vec{1, 2, 3});
    CHECK(concat_person(Vec{1, 2}, Vec{}) == Vec{1, 2}); // variants without a person LSTM
    Vec x(4096, 0.0), h(3000, 0.0);
    CHECK(concat_person(x, h).size() == 7096);
}

TEST_CASE("sub-group bounds on divisible counts follow the closed form") {
    CHECK(subgroup_bounds(12, 2, 1) == GroupBounds{1, 6});
    CHECK(subgroup_bounds(12, 2, 2) == GroupBounds{7, 12});
    CHECK(subgroup_bounds(12, 1, 1) == GroupBounds{1, 12});
    for (std::size_t k = 1; k <= 24; ++k) {
        for (std::size_t d = 1; d <= k; ++d) {
            if (k % d != 0) continue;
            for (std::size_t m = 1; m <= d; ++m) {
                GroupBounds b = subgroup_bounds(k, d, m);
                CHECK(b.s == (m - 1) * k / d + 1);
                CHECK(b.e == m * k / d);
            }
        }
    }
}

TEST_CASE("sub-group bounds remainder rule") {
    CHECK(subgroup_bounds(10, 4, 1) == GroupBounds{1, 3});
    CHECK(subgroup_bounds(10, 4, 2) == GroupBounds{4, 6});
    CHECK(subgroup_bounds(10, 4, 3) == GroupBounds{7, 9});
    CHECK(subgroup_bounds(10, 4, 4) == GroupBounds{10, 10});

    CHECK_THROWS_AS(subgroup_bounds(3, 4, 1), DomainError);
    CHECK_THROWS_AS(subgroup_bounds(10, 4, 0), DomainError);
    CHECK_THROWS_AS(subgroup_bounds(10, 4, 5), DomainError);
}

TEST_CASE("the d groups tile 1..k exactly, for every k and d") {
    for (std::size_t k = 1; k <= 24; ++k) {
        for (std::size_t d = 1; d <= k; ++d) {
            std::size_t expected_next = 1;
            std::size_t leading = (k + d - 1) / d;
            bool shrunk = false;
            for (std::size_t m = 1; m <= d; ++m) {
                GroupBounds b = subgroup_bounds(k, d, m);
                CHECK(b.s == expected_next);
                CHECK(b.s <= b.e);
                CHECK(b.e <= k);
                // leading groups take ceil(k/d); sizes never grow again after
                // the first shrunken group
                if (b.size() < leading) shrunk = true;
                if (!shrunk) CHECK(b.size() == leading);
                expected_next = b.e + 1;
            }
            CHECK(expected_next == k + 1);
        }
    }
}

TEST_CASE("pool_group elementwise definitions") {
    std::vector<Vec> two{Vec{1, -2}, Vec{0, 5}};
    CHECK(pool_group(two, {1, 2}, PoolStrategy::Max) == Vec{1, 5});
    CHECK(pool_group(two, {1, 2}, PoolStrategy::Average) == Vec{0.5, 1.5});

    std::vector<Vec> same{Vec{3, 1}, Vec{3, 1}, Vec{3, 1}};
    CHECK(pool_group(same, {1, 3}, PoolStrategy::Max) == Vec{3, 1});
    CHECK(pool_group(same, {1, 3}, PoolStrategy::Average) == Vec{3, 1});

    CHECK_THROWS_AS(pool_group(two, {2, 1}, PoolStrategy::Max), DomainError);
    CHECK_THROWS_AS(pool_group(two, {1, 3}, PoolStrategy::Max), DomainError);
}

TEST_CASE("scene repr with one group equals direct pooling") {
    Rng rng(21);
    std::vector<Vec> reprs;
    for (int i = 0; i < 5; ++i) reprs.push_back(random_vec(rng, 4));
    for (PoolStrategy s : {PoolStrategy::Max, PoolStrategy::Average}) {
        Vec direct = pool_group(reprs, {1, 5}, s);
        Vec via = scene_repr(reprs, {s, 1});
        CHECK(via == direct); // bitwise
    }
}

TEST_CASE("scene repr matches a brute-force slice oracle") {
    Rng rng(22);
    std::vector<Vec> reprs;
    for (int i = 0; i < 4; ++i) reprs.push_back(random_vec(rng, 3));
    Vec z = scene_repr(reprs, {PoolStrategy::Max, 2});
    REQUIRE(z.size() == 6);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(z[j] == std::max(reprs[0][j], reprs[1][j]));
        CHECK(z[3 + j] == std::max(reprs[2][j], reprs[3][j]));
    }
    CHECK_THROWS_AS(scene_repr(std::vector<Vec>{Vec{1}}, PoolingConfig{PoolStrategy::Max, 2}),
                    DomainError);
}

TEST_CASE("permuting inside a sub-group leaves the scene repr unchanged") {
    Rng outer(23);
    for (int rep = 0; rep < 1000; ++rep) {
        Rng rng(outer.next_u64());
        std::size_t k = 2 + rng.below(8);
        std::size_t d = 1 + rng.below(k);
        std::size_t dim = 1 + rng.below(5);
        PoolStrategy strat = rng.below(2) ? PoolStrategy::Max : PoolStrategy::Average;
        std::vector<Vec> reprs;
        for (std::size_t i = 0; i < k; ++i) reprs.push_back(random_vec(rng, dim));
        PoolingConfig cfg{strat, d};
        Vec base = scene_repr(reprs, cfg);

        // shuffle every group slice in place
        std::vector<Vec> shuffled = reprs;
        for (std::size_t m = 1; m <= d; ++m) {
            GroupBounds b = subgroup_bounds(k, d, m);
            for (std::size_t i = b.e - 1; i > b.s - 1; --i) {
                std::size_t j = b.s - 1 + rng.below(i - (b.s - 1) + 1);
                std::swap(shuffled[i], shuffled[j]);
            }
        }
        Vec permuted = scene_repr(shuffled, cfg);
        if (strat == PoolStrategy::Max) {
            CHECK(permuted == base); // max of a set is order-free, bitwise
        } else {
            // averaging sums in list order; permutation may change rounding
            for (std::size_t j = 0; j < base.size(); ++j) {
                CHECK(permuted[j] == doctest::Approx(base[j]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("max pooling dominates every pooled input") {
    Rng rng(24);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t k = 1 + rng.below(6);
        std::vector<Vec> reprs;
        for (std::size_t i = 0; i < k; ++i) reprs.push_back(random_vec(rng, 4));
        Vec pooled = pool_group(reprs, {1, k}, PoolStrategy::Max);
        for (const Vec& r : reprs) {
            for (std::size_t j = 0; j < 4; ++j) CHECK(pooled[j] >= r[j]);
        }
    }
}

TEST_CASE("average pooling commutes with uniform scaling") {
    Rng rng(25);
    std::vector<Vec> reprs;
    for (int i = 0; i < 6; ++i) reprs.push_back(random_vec(rng, 5));
    const double c = 3.7;
    std::vector<Vec> scaled = reprs;
    for (auto& r : scaled) {
        for (double& x : r) x *= c;
    }
    PoolingConfig cfg{PoolStrategy::Average, 3};
    Vec a = scene_repr(scaled, cfg);
    Vec b = scene_repr(reprs, cfg);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(a[j] == doctest::Approx(c * b[j]).epsilon(1e-12));
    }
}

TEST_CASE("people order by x, then y, then stable index") {
    std::vector<OrderKey> ppl{{5, 0, 0}, {1, 0, 1}, {3, 0, 2}};
    CHECK(order_people(ppl) == std::vector<std::size_t>{1, 2, 0});

    std::vector<OrderKey> tie{{2, 7, 0}, {2, 2, 1}};
    CHECK(order_people(tie) == std::vector<std::size_t>{1, 0});

    std::vector<OrderKey> same{{1, 1, 0}, {1, 1, 1}, {1, 1, 2}};
    CHECK(order_people(same) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("pool backward routes gradients correctly") {
    std::vector<Vec> four(4, Vec{1, 1});
    auto avg = pool_backward(PoolStrategy::Average, four, Vec{1, 1});
    for (const auto& g : avg) CHECK(g == Vec{0.25, 0.25});

    std::vector<Vec> inputs{Vec{3, -1}, Vec{0, 2}};
    auto mx = pool_backward(PoolStrategy::Max, inputs, Vec{10, 20});
    CHECK(mx[0] == Vec{10, 0});
    CHECK(mx[1] == Vec{0, 20});

    // ties go to the lowest index
    std::vector<Vec> tied{Vec{1}, Vec{1}};
    auto tg = pool_backward(PoolStrategy::Max, tied, Vec{5});
    CHECK(tg[0] == Vec{5});
    CHECK(tg[1] == Vec{0});
}

TEST_CASE("pool gradients agree with finite differences") {
    const double eps = 1e-5;
    Rng rng(26);
    for (PoolStrategy strat : {PoolStrategy::Max, PoolStrategy::Average}) {
        std::vector<Vec> inputs;
        for (int i = 0; i < 4; ++i) {
            Vec v = random_vec(rng, 3);
            // keep coordinates separated so the argmax never flips
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] = std::round(v[j] * 10.0) / 10.0 + 0.01 * static_cast<double>(i);
            }
            inputs.push_back(v);
        }
        Vec w = random_vec(rng, 3);
        auto loss = [&]() {
            return dot(w, pool_group(inputs, {1, inputs.size()}, strat));
        };
        auto analytic = pool_backward(strat, inputs, w);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                double saved = inputs[i][j];
                inputs[i][j] = saved + eps;
                double up = loss();
                inputs[i][j] = saved - eps;
                double down = loss();
                inputs[i][j] = saved;
                double numeric = (up - down) / (2 * eps);
                double rel = std::abs(analytic[i][j] - numeric) /
                             std::max({std::abs(analytic[i][j]), std::abs(numeric), 1e-4});
                CHECK(rel < 1e-4);
            }
        }
    }
}

TEST_SUITE_END();
