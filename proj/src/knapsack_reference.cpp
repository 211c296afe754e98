// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

// Straightforward serial versions of the knapsack kernels. They share no code
// with the OpenMP paths beyond KnapsackInstance::evaluate.

#include <algorithm>

#include "peftsel/error.hpp"
#include "peftsel/knapsack.hpp"

namespace peftsel::reference {

namespace {

std::vector<bool> nth_mask(std::uint64_t n, std::size_t k) {
    std::vector<bool> mask(k);
    for (std::size_t i = 0; i < k; ++i) mask[i] = (n >> i) & 1u;
    return mask;
}

}  // namespace

SelectionResult solve_exhaustive(const KnapsackInstance& inst, double epsilon) {
    if (inst.size() > kExhaustiveMaxItems) throw GuardError("reference exhaustive search: too many items");
    const std::uint64_t cap = inst.capacity(epsilon);
    SelectionResult best = inst.empty_selection();
    for (std::uint64_t n = 1; n < (std::uint64_t{1} << inst.size()); ++n) {
        SelectionResult s = inst.evaluate(nth_mask(n, inst.size()));
        if (s.total_weight <= cap && preferred(s, best)) best = std::move(s);
    }
    return best;
}

SelectionResult solve_dp(const KnapsackInstance& inst, double epsilon, DpOptions options) {
    if (options.weight_divisor == 0) throw ContractError("dp weight_divisor must be >= 1");
    const std::uint64_t d = options.weight_divisor;
    const std::size_t cap = static_cast<std::size_t>(inst.capacity(epsilon) / d);
    const std::size_t k = inst.size();
    if (static_cast<long double>(k) * (cap + 1.0L) > static_cast<long double>(options.max_table_bits) ||
        cap > options.max_capacity) {
        throw GuardError("reference dp table too large; raise the weight divisor");
    }
    std::vector<std::size_t> w(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::uint64_t raw = inst.items()[i].weight;
        w[i] = static_cast<std::size_t>((raw + d - 1) / d);
    }

    // table[i][c]: best value using items i..k-1 within capacity c.
    std::vector<std::vector<double>> table(k + 1, std::vector<double>(cap + 1, 0.0));
    for (std::size_t i = k; i-- > 0;) {
        const double v = inst.items()[i].value;
        for (std::size_t c = 0; c <= cap; ++c) {
            table[i][c] = table[i + 1][c];
            if (c >= w[i]) table[i][c] = std::max(table[i][c], table[i + 1][c - w[i]] + v);
        }
    }

    std::size_t c = cap;
    while (c > 0 && table[0][c - 1] == table[0][cap]) --c;
    std::vector<bool> mask(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        if (table[i][c] != table[i + 1][c]) {
            mask[i] = true;
            c -= w[i];
        }
    }
    return inst.evaluate(mask);
}

std::vector<ParetoPoint> pareto_frontier(const KnapsackInstance& inst) {
    if (inst.size() > kExhaustiveMaxItems) throw GuardError("reference frontier: too many items");
    std::vector<SelectionResult> all;
    for (std::uint64_t n = 0; n < (std::uint64_t{1} << inst.size()); ++n) {
        all.push_back(inst.evaluate(nth_mask(n, inst.size())));
    }

    std::vector<ParetoPoint> out;
    for (const auto& s : all) {
        const bool dominated =
            std::any_of(all.begin(), all.end(), [&s](const SelectionResult& o) { return dominates(o, s); });
        if (dominated) continue;
        auto same = std::find_if(out.begin(), out.end(), [&s](const ParetoPoint& p) {
            return p.selection.total_value == s.total_value && p.selection.total_weight == s.total_weight;
        });
        if (same == out.end()) {
            out.push_back({s, false});
        } else if (mask_less(s.mask, same->selection.mask)) {
            same->selection = s;
        }
    }
    std::sort(out.begin(), out.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        return a.selection.total_weight < b.selection.total_weight;
    });
    return out;
}

}  // namespace peftsel::reference
