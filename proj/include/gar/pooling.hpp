#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gar/numcore.hpp"

namespace gar {

enum class PoolStrategy { Max, Average };

// 1-based inclusive slice [s, e] of the ordered person list.
struct GroupBounds {
    std::size_t s = 0;
    std::size_t e = 0;

    std::size_t size() const { return e - s + 1; }
    bool operator==(const GroupBounds&) const = default;
};

struct PoolingConfig {
    PoolStrategy strategy = PoolStrategy::Max;
    std::size_t groups = 1; // the sub-group count d

    bool operator==(const PoolingConfig&) const = default;
};

// Per-person ordering key: top-left bounding box corner plus the stable
// position in the input list.
struct OrderKey {
    double x = 0.0;
    double y = 0.0;
    std::size_t index = 0;
};

// Person representation: observation features first, then the person LSTM
// hidden state (which may be empty).
Vec concat_person(const Vec& x, const Vec& h);

// Bounds of sub-group m (1-based) when k people are split into d contiguous
// groups. When d divides k this is exactly
//   s = (m-1) * k/d + 1,  e = m * k/d.
// Otherwise leading groups take ceil(k/d) people, capped so that every
// trailing group keeps at least one: the final groups shrink.
GroupBounds subgroup_bounds(std::size_t k, std::size_t d, std::size_t m);

// Elementwise max or mean over reprs[s-1 .. e-1].
Vec pool_group(std::span<const Vec> reprs, GroupBounds bounds, PoolStrategy strategy);

// Concatenation of the d pooled sub-group vectors, in group order. reprs must
// already be in canonical person order.
Vec scene_repr(std::span<const Vec> reprs, const PoolingConfig& cfg);

// Permutation sorting people ascending by bbox x, then y, then input index.
std::vector<std::size_t> order_people(std::span<const OrderKey> people);

// Gradient of pool_group w.r.t. each pooled input. Max routes each
// coordinate's gradient to the first-occurring argmax input; average divides
// it equally.
std::vector<Vec> pool_backward(PoolStrategy strategy, std::span<const Vec> inputs,
                               const Vec& upstream);

} // namespace gar
