#include "gar/pooling.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gar {

Vec concat_person(const Vec& x, const Vec& h) {
    Vec p;
    p.reserve(x.size() + h.size());
    p.insert(p.end(), x.begin(), x.end());
    p.insert(p.end(), h.begin(), h.end());
    return p;
}

GroupBounds subgroup_bounds(std::size_t k, std::size_t d, std::size_t m) {
    if (d == 0 || d > k) {
        throw DomainError("subgroup_bounds: need 1 <= d <= k, got d=" + std::to_string(d) +
                          " k=" + std::to_string(k));
    }
    if (m == 0 || m > d) {
        throw DomainError("subgroup_bounds: group index " + std::to_string(m) +
                          " out of 1.." + std::to_string(d));
    }
    const std::size_t q = (k + d - 1) / d; // ceil(k/d)
    // Cap at k-d+m, which leaves one person for each remaining group.
    const std::size_t cap = k - d + m;
    GroupBounds b;
    b.s = std::min((m - 1) * q + 1, cap);
    b.e = std::min(m * q, cap);
    return b;
}

Vec pool_group(std::span<const Vec> reprs, GroupBounds bounds, PoolStrategy strategy) {
    if (bounds.s == 0 || bounds.s > bounds.e || bounds.e > reprs.size()) {
        throw DomainError("pool_group: bounds [" + std::to_string(bounds.s) + "," +
                          std::to_string(bounds.e) + "] invalid for " +
                          std::to_string(reprs.size()) + " people");
    }
    Vec out = reprs[bounds.s - 1];
    for (std::size_t i = bounds.s; i < bounds.e; ++i) {
        const Vec& r = reprs[i];
        if (r.size() != out.size()) throw ShapeError("pool_group: mixed repr dims");
        if (strategy == PoolStrategy::Max) {
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], r[j]);
        } else {
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
        }
    }
    if (strategy == PoolStrategy::Average) {
        const double inv = 1.0 / static_cast<double>(bounds.size());
        for (double& v : out) v *= inv;
    }
    return out;
}

Vec scene_repr(std::span<const Vec> reprs, const PoolingConfig& cfg) {
    if (reprs.size() < cfg.groups) {
        throw DomainError("scene_repr: " + std::to_string(reprs.size()) + " people for " +
                          std::to_string(cfg.groups) + " sub-groups");
    }
    Vec z;
    for (std::size_t m = 1; m <= cfg.groups; ++m) {
        Vec g = pool_group(reprs, subgroup_bounds(reprs.size(), cfg.groups, m), cfg.strategy);
        z.insert(z.end(), g.begin(), g.end());
    }
    return z;
}

std::vector<std::size_t> order_people(std::span<const OrderKey> people) {
    std::vector<std::size_t> perm(people.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        const OrderKey& ka = people[a];
        const OrderKey& kb = people[b];
        if (ka.x != kb.x) return ka.x < kb.x;
        if (ka.y != kb.y) return ka.y < kb.y;
        return ka.index < kb.index;
    });
    return perm;
}

std::vector<Vec> pool_backward(PoolStrategy strategy, std::span<const Vec> inputs,
                               const Vec& upstream) {
    if (inputs.empty()) throw DomainError("pool_backward: no inputs");
    const std::size_t dim = upstream.size();
    std::vector<Vec> grads(inputs.size(), Vec(dim, 0.0));
    if (strategy == PoolStrategy::Average) {
        const double inv = 1.0 / static_cast<double>(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            for (std::size_t j = 0; j < dim; ++j) grads[i][j] = upstream[j] * inv;
        }
        return grads;
    }
    // Max: all of the gradient goes to the first argmax, ties broken toward
    // the lowest index so updates stay deterministic.
    for (std::size_t j = 0; j < dim; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < inputs.size(); ++i) {
            if (inputs[i][j] > inputs[best][j]) best = i;
        }
        grads[best][j] = upstream[j];
    }
    return grads;
}

} // namespace gar
