// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "peftsel/knapsack.hpp"

namespace peftsel::detail {

// Subset encoded as bits (item i at bit i) with totals summed in item order.
struct Candidate {
    double value = 0.0;
    std::uint64_t weight = 0;
    std::uint64_t bits = 0;
};

// Lexicographic order on masks where item 0 is most significant.
inline bool bits_less(std::uint64_t a, std::uint64_t b) {
    const std::uint64_t diff = a ^ b;
    if (diff == 0) return false;
    const std::uint64_t low = diff & (~diff + 1);
    return (a & low) == 0;
}

inline bool better(const Candidate& a, const Candidate& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.weight != b.weight) return a.weight < b.weight;
    return bits_less(a.bits, b.bits);
}

struct Columns {
    explicit Columns(const KnapsackInstance& inst);
    Candidate eval(std::uint64_t bits) const;

    std::vector<double> values;
    std::vector<std::uint64_t> weights;
};

std::vector<bool> bits_to_mask(std::uint64_t bits, std::size_t k);
void check_exhaustive_guard(const KnapsackInstance& inst);
int thread_count(Parallelism par);

}  // namespace peftsel::detail
