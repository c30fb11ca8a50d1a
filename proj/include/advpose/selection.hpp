#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "advpose/error.hpp"

namespace advpose {

// Per-candidate fitness values the ranking operates on. Higher is more
// adversarial (isp) / more natural (nat).
struct FitnessRecord {
    double isp = 0.0;
    double nat = 0.0;
};

enum class SelectionMode { TwoStage, Scalarized };

struct RankedPopulation {
    std::vector<int> selected;    // candidate indices, ordered by isp descending
    int population_size = 0;
};

// Truncation selection. Two-stage: keep the m most adversarial candidates
// by isp, then the k most natural among them; the returned k are ordered
// by isp descending (this ordering carries the rank weights). Scalarized:
// keep the top k by isp + lambda * nat. Sorts are stable, with candidate
// index as the outermost tiebreaker: equal keys at any stage keep the
// previous stage's order, which bottoms out at index order.
inline RankedPopulation select(const std::vector<FitnessRecord>& records, int m, int k,
                               SelectionMode mode, double lambda) {
    const int total = static_cast<int>(records.size());
    if (k < 1 || m < k || total < m)
        throw InvalidInput("selection sizes must satisfy K >= m >= k >= 1");

    std::vector<int> order(records.size());
    std::iota(order.begin(), order.end(), 0);

    auto by_desc = [&](auto key) {
        return [&, key](int a, int b) { return key(records[a]) > key(records[b]); };
    };

    RankedPopulation out;
    out.population_size = total;

    if (mode == SelectionMode::Scalarized) {
        std::stable_sort(order.begin(), order.end(),
                         by_desc([&](const FitnessRecord& r) { return r.isp + lambda * r.nat; }));
        out.selected.assign(order.begin(), order.begin() + k);
        return out;
    }

    std::stable_sort(order.begin(), order.end(),
                     by_desc([](const FitnessRecord& r) { return r.isp; }));
    std::vector<int> pool(order.begin(), order.begin() + m);
    std::stable_sort(pool.begin(), pool.end(),
                     by_desc([](const FitnessRecord& r) { return r.nat; }));
    pool.resize(k);
    std::stable_sort(pool.begin(), pool.end(),
                     by_desc([](const FitnessRecord& r) { return r.isp; }));
    out.selected = std::move(pool);
    return out;
}

}  // namespace advpose
