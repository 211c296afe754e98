// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peftsel {

/// One knapsack item: a parameter group with its loss-reduction value and
/// parameter-count weight.
struct Item {
    std::string name;
    double value = 0.0;
    std::uint64_t weight = 1;
};

struct SelectionResult {
    std::vector<bool> mask;
    double total_value = 0.0;
    std::uint64_t total_weight = 0;
    double fraction = 0.0;  // total_weight / instance total weight

    bool operator==(const SelectionResult&) const = default;
};

struct ParetoPoint {
    SelectionResult selection;
    bool dominated = false;
};

/// Immutable 0-1 knapsack instance. Negative values are clamped to zero
/// with a warning; weights must be positive and names unique.
class KnapsackInstance {
public:
    explicit KnapsackInstance(std::vector<Item> items);

    const std::vector<Item>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::uint64_t total_weight() const { return total_weight_; }

    /// floor(epsilon * total_weight). epsilon must lie in [0, 1].
    std::uint64_t capacity(double epsilon) const;

    /// Totals recomputed from the mask, summing in item order.
    SelectionResult evaluate(const std::vector<bool>& mask) const;
    SelectionResult evaluate_bits(std::uint64_t bits) const;

    SelectionResult empty_selection() const { return evaluate(std::vector<bool>(size(), false)); }

private:
    std::vector<Item> items_;
    std::uint64_t total_weight_ = 0;
};

/// s1 has at least the value of s2 at no more weight, strictly better in one.
bool dominates(const SelectionResult& s1, const SelectionResult& s2);

/// Lexicographic mask order with item 0 most significant and false < true.
bool mask_less(const std::vector<bool>& lhs, const std::vector<bool>& rhs);

/// The total order every exact solver uses: higher value, then lower
/// weight, then lexicographically smaller mask.
bool preferred(const SelectionResult& lhs, const SelectionResult& rhs);

inline constexpr std::size_t kExhaustiveMaxItems = 25;
inline constexpr std::size_t kMitmMaxItems = 40;

/// Worker count for the OpenMP kernels; 0 uses the OpenMP default.
/// Results do not depend on it.
struct Parallelism {
    int threads = 0;
};

/// Best mask over all 2^K subsets within capacity. Because ties go to the
/// lighter mask, the result is the Pareto-refined optimum directly.
/// Throws GuardError when K > kExhaustiveMaxItems.
SelectionResult solve_exhaustive(const KnapsackInstance& inst, double epsilon, Parallelism par = {});

struct DpOptions {
    // Weights become ceil(w / divisor) and the capacity floor(C / divisor).
    // Selections stay feasible, but the optimum may be missed once divisor > 1.
    std::uint64_t weight_divisor = 1;
    // Upper bound on the K x (C + 1) decision table, in bits.
    std::uint64_t max_table_bits = std::uint64_t{1} << 31;
    // Upper bound on the rescaled capacity (each cell holds two doubles).
    std::uint64_t max_capacity = std::uint64_t{1} << 24;
};

/// Exact optimum over the (possibly rescaled) capacity with the same
/// tie-breaking as solve_exhaustive. Throws GuardError when the decision
/// table would exceed max_table_bits or the capacity max_capacity.
SelectionResult solve_dp(const KnapsackInstance& inst, double epsilon, DpOptions options = {},
                         Parallelism par = {});

/// Meet-in-the-middle exact solver for K <= kMitmMaxItems.
SelectionResult solve_mitm(const KnapsackInstance& inst, double epsilon);

/// Prefix family A_1 c A_2 c ... c A_K after sorting by value/weight
/// descending (ties: smaller weight, then name).
std::vector<SelectionResult> solve_greedy(const KnapsackInstance& inst);

/// Picks A_k with fraction(A_k) <= epsilon < fraction(A_{k+1}); the empty
/// selection when even A_1 does not fit.
SelectionResult select_greedy(const KnapsackInstance& inst, std::span<const SelectionResult> prefixes,
                              double epsilon);

/// Among feasible candidates of maximum value, the lightest (then
/// lexicographically smallest). Throws ContractError on an empty list or an
/// infeasible candidate.
SelectionResult refine_pareto(const KnapsackInstance& inst, double epsilon,
                              std::span<const SelectionResult> candidates);

enum class FrontierMode { exact, greedy };

/// exact: every undominated (value, weight) point over all subsets, weight
/// ascending with value strictly increasing. greedy: the empty set plus the
/// K greedy prefixes, with dominance computed among those K + 1 points only.
std::vector<ParetoPoint> pareto_frontier(const KnapsackInstance& inst, FrontierMode mode = FrontierMode::exact,
                                         Parallelism par = {});

/// True iff no subset of the instance dominates the selection (K <= 25).
bool is_pareto_optimal(const KnapsackInstance& inst, const SelectionResult& selection, Parallelism par = {});

enum class Solver { greedy, dp, exhaustive, mitm };

Solver parse_solver(std::string_view name);
std::string_view to_string(Solver solver);

/// Dispatches to the chosen solver; greedy applies the epsilon-interval rule.
SelectionResult solve(const KnapsackInstance& inst, double epsilon, Solver solver, DpOptions dp = {});

/// Serial implementations kept as test oracles and benchmark baselines.
namespace reference {

SelectionResult solve_exhaustive(const KnapsackInstance& inst, double epsilon);
SelectionResult solve_dp(const KnapsackInstance& inst, double epsilon, DpOptions options = {});
// Quadratic dominance scan over all subsets; meant for K <= 14.
std::vector<ParetoPoint> pareto_frontier(const KnapsackInstance& inst);

}  // namespace reference

}  // namespace peftsel
