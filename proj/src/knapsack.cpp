// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/knapsack.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "knapsack_internal.hpp"
#include "peftsel/error.hpp"

namespace peftsel {

KnapsackInstance::KnapsackInstance(std::vector<Item> items) : items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        Item& it = items_[i];
        if (it.weight == 0) throw ContractError("item '" + it.name + "' has zero weight");
        if (!std::isfinite(it.value)) throw ContractError("item '" + it.name + "' has a non-finite value");
        if (it.value < 0) {
            warn("item '" + it.name + "' has negative value " + std::to_string(it.value) + "; clamped to 0");
            it.value = 0;
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (items_[j].name == it.name) throw ContractError("duplicate item name '" + it.name + "'");
        }
        if (total_weight_ > std::numeric_limits<std::uint64_t>::max() - it.weight) {
            throw ContractError("total weight overflows 64 bits");
        }
        total_weight_ += it.weight;
    }
}

std::uint64_t KnapsackInstance::capacity(double epsilon) const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must lie in [0, 1]");
    // Plain double product, so 0.6 * 5 gives 3 rather than 2.999...
    const double cap = std::floor(epsilon * static_cast<double>(total_weight_));
    return std::min<std::uint64_t>(static_cast<std::uint64_t>(cap), total_weight_);
}

SelectionResult KnapsackInstance::evaluate(const std::vector<bool>& mask) const {
    if (mask.size() != items_.size()) throw ContractError("mask length does not match item count");
    SelectionResult r;
    r.mask = mask;
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (mask[i]) {
            r.total_value += items_[i].value;
            r.total_weight += items_[i].weight;
        }
    }
    r.fraction = total_weight_ == 0 ? 0.0 : static_cast<double>(r.total_weight) / static_cast<double>(total_weight_);
    return r;
}

SelectionResult KnapsackInstance::evaluate_bits(std::uint64_t bits) const {
    return evaluate(detail::bits_to_mask(bits, items_.size()));
}

bool dominates(const SelectionResult& s1, const SelectionResult& s2) {
    return s1.total_value >= s2.total_value && s1.total_weight <= s2.total_weight &&
           (s1.total_value > s2.total_value || s1.total_weight < s2.total_weight);
}

bool mask_less(const std::vector<bool>& lhs, const std::vector<bool>& rhs) {
    return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(), rhs.end());
}

bool preferred(const SelectionResult& lhs, const SelectionResult& rhs) {
    if (lhs.total_value != rhs.total_value) return lhs.total_value > rhs.total_value;
    if (lhs.total_weight != rhs.total_weight) return lhs.total_weight < rhs.total_weight;
    return mask_less(lhs.mask, rhs.mask);
}

namespace detail {

std::vector<bool> bits_to_mask(std::uint64_t bits, std::size_t k) {
    std::vector<bool> mask(k, false);
    for (std::size_t i = 0; i < k; ++i) mask[i] = (bits >> i) & 1u;
    return mask;
}

Columns::Columns(const KnapsackInstance& inst) {
    values.reserve(inst.size());
    weights.reserve(inst.size());
    for (const auto& it : inst.items()) {
        values.push_back(it.value);
        weights.push_back(it.weight);
    }
}

Candidate Columns::eval(std::uint64_t bits) const {
    Candidate c{0.0, 0, bits};
    while (bits) {
        const int i = std::countr_zero(bits);
        c.value += values[i];
        c.weight += weights[i];
        bits &= bits - 1;
    }
    return c;
}

void check_exhaustive_guard(const KnapsackInstance& inst) {
    if (inst.size() > kExhaustiveMaxItems) {
        throw GuardError("exhaustive search is limited to " + std::to_string(kExhaustiveMaxItems) + " items (got " +
                         std::to_string(inst.size()) + "); use the dp, mitm or greedy solver");
    }
}

int thread_count(Parallelism par) { return par.threads > 0 ? par.threads : omp_get_max_threads(); }

}  // namespace detail

using detail::Candidate;

SelectionResult solve_exhaustive(const KnapsackInstance& inst, double epsilon, Parallelism par) {
    detail::check_exhaustive_guard(inst);
    const std::uint64_t cap = inst.capacity(epsilon);
    const detail::Columns cols(inst);
    const std::int64_t n = std::int64_t{1} << inst.size();

    Candidate best{0.0, 0, 0};  // the empty mask is always feasible
#pragma omp parallel num_threads(detail::thread_count(par))
    {
        Candidate local{0.0, 0, 0};
#pragma omp for schedule(static) nowait
        for (std::int64_t bits = 1; bits < n; ++bits) {
            const Candidate c = cols.eval(static_cast<std::uint64_t>(bits));
            if (c.weight <= cap && detail::better(c, local)) local = c;
        }
#pragma omp critical(peftsel_exhaustive_merge)
        if (detail::better(local, best)) best = local;
    }
    return inst.evaluate_bits(best.bits);
}

namespace {

struct ScaledProblem {
    std::vector<double> values;
    std::vector<std::uint64_t> weights;
    std::uint64_t capacity = 0;
};

ScaledProblem scale(const KnapsackInstance& inst, double epsilon, const DpOptions& options) {
    if (options.weight_divisor == 0) throw ContractError("dp weight_divisor must be >= 1");
    const std::uint64_t d = options.weight_divisor;
    ScaledProblem p;
    p.capacity = inst.capacity(epsilon) / d;
    for (const auto& it : inst.items()) {
        p.values.push_back(it.value);
        p.weights.push_back(it.weight / d + (it.weight % d != 0 ? 1 : 0));
    }
    const std::size_t k = inst.size();
    const long double bits = static_cast<long double>(k) * (static_cast<long double>(p.capacity) + 1.0L);
    if (bits > static_cast<long double>(options.max_table_bits) || p.capacity > options.max_capacity) {
        throw GuardError("dp table of " + std::to_string(k) + " x " + std::to_string(p.capacity + 1) +
                         " cells exceeds the limit; raise the weight divisor (currently " + std::to_string(d) + ")");
    }
    return p;
}

}  // namespace

SelectionResult solve_dp(const KnapsackInstance& inst, double epsilon, DpOptions options, Parallelism par) {
    const ScaledProblem p = scale(inst, epsilon, options);
    const std::size_t k = inst.size();
    const std::size_t width = static_cast<std::size_t>(p.capacity) + 1;
    const std::size_t words = (width + 63) / 64;

    // best[c]: max value of items i..K-1 within capacity c. take bit (i, c) is
    // set when including item i is strictly better, so ties exclude it.
    std::vector<double> cur(width, 0.0), next(width, 0.0);
    std::vector<std::uint64_t> take(k * words, 0);
    const int threads = detail::thread_count(par);

    for (std::size_t ii = k; ii-- > 0;) {
        const double v = p.values[ii];
        const std::uint64_t w = p.weights[ii];
        std::uint64_t* row = take.data() + ii * words;
        const std::int64_t nwords = static_cast<std::int64_t>(words);
#pragma omp parallel for num_threads(threads) schedule(static) if (width > 4096)
        for (std::int64_t wi = 0; wi < nwords; ++wi) {
            const std::size_t lo = static_cast<std::size_t>(wi) * 64;
            const std::size_t hi = std::min(lo + 64, width);
            std::uint64_t word = 0;
            for (std::size_t c = lo; c < hi; ++c) {
                double out = cur[c];
                if (c >= w) {
                    const double with = cur[c - w] + v;
                    if (with > out) {
                        out = with;
                        word |= std::uint64_t{1} << (c - lo);
                    }
                }
                next[c] = out;
            }
            row[wi] = word;
        }
        cur.swap(next);
    }

    // Lightest capacity that still reaches the optimum.
    const double opt = cur[width - 1];
    std::size_t c = width - 1;
    while (c > 0 && cur[c - 1] == opt) --c;

    std::vector<bool> mask(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        const std::uint64_t* row = take.data() + i * words;
        if ((row[c / 64] >> (c % 64)) & 1u) {
            mask[i] = true;
            c -= p.weights[i];
        }
    }
    return inst.evaluate(mask);
}

SelectionResult solve_mitm(const KnapsackInstance& inst, double epsilon) {
    const std::size_t k = inst.size();
    if (k > kMitmMaxItems) {
        throw GuardError("meet-in-the-middle is limited to " + std::to_string(kMitmMaxItems) + " items (got " +
                         std::to_string(k) + "); use the dp or greedy solver");
    }
    const std::uint64_t cap = inst.capacity(epsilon);
    const detail::Columns cols(inst);
    const std::size_t h = k / 2;
    const std::uint64_t first_n = std::uint64_t{1} << h;
    const std::uint64_t second_n = std::uint64_t{1} << (k - h);

    // Second half: sorted by weight, then a running best under the solver order.
    std::vector<Candidate> upper;
    upper.reserve(second_n);
    for (std::uint64_t m = 0; m < second_n; ++m) {
        Candidate c = cols.eval(m << h);
        if (c.weight <= cap) upper.push_back(c);
    }
    std::sort(upper.begin(), upper.end(), [](const Candidate& a, const Candidate& b) {
        return a.weight != b.weight ? a.weight < b.weight : detail::better(a, b);
    });
    std::vector<Candidate> prefix_best(upper.size());
    for (std::size_t i = 0; i < upper.size(); ++i) {
        prefix_best[i] = (i == 0 || detail::better(upper[i], prefix_best[i - 1])) ? upper[i] : prefix_best[i - 1];
    }

    Candidate best{0.0, 0, 0};
    for (std::uint64_t m = 0; m < first_n; ++m) {
        const Candidate lo = cols.eval(m);
        if (lo.weight > cap) continue;
        const std::uint64_t room = cap - lo.weight;
        auto it = std::upper_bound(upper.begin(), upper.end(), room,
                                   [](std::uint64_t r, const Candidate& c) { return r < c.weight; });
        if (it == upper.begin()) continue;
        const Candidate& hi = prefix_best[static_cast<std::size_t>(it - upper.begin()) - 1];
        const Candidate joint{lo.value + hi.value, lo.weight + hi.weight, lo.bits | hi.bits};
        if (detail::better(joint, best)) best = joint;
    }
    return inst.evaluate_bits(best.bits);
}

std::vector<SelectionResult> solve_greedy(const KnapsackInstance& inst) {
    const auto& items = inst.items();
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&items](std::size_t x, std::size_t y) {
        const double rx = items[x].value / static_cast<double>(items[x].weight);
        const double ry = items[y].value / static_cast<double>(items[y].weight);
        if (rx != ry) return rx > ry;
        if (items[x].weight != items[y].weight) return items[x].weight < items[y].weight;
        return items[x].name < items[y].name;
    });

    std::vector<SelectionResult> prefixes;
    prefixes.reserve(items.size());
    std::vector<bool> mask(items.size(), false);
    for (std::size_t idx : order) {
        mask[idx] = true;
        prefixes.push_back(inst.evaluate(mask));
    }
    return prefixes;
}

SelectionResult select_greedy(const KnapsackInstance& inst, std::span<const SelectionResult> prefixes,
                              double epsilon) {
    const std::uint64_t cap = inst.capacity(epsilon);
    SelectionResult chosen = inst.empty_selection();
    for (const auto& p : prefixes) {
        if (p.total_weight > cap) break;
        chosen = p;
    }
    return chosen;
}

SelectionResult refine_pareto(const KnapsackInstance& inst, double epsilon,
                              std::span<const SelectionResult> candidates) {
    if (candidates.empty()) throw ContractError("refine_pareto needs at least one candidate");
    const std::uint64_t cap = inst.capacity(epsilon);
    const SelectionResult* best = nullptr;
    for (const auto& c : candidates) {
        if (c.total_weight > cap) throw ContractError("refine_pareto candidate exceeds the capacity");
        if (best == nullptr || preferred(c, *best)) best = &c;
    }
    return *best;
}

namespace {

// Sort by weight, then value descending, then mask, and keep strictly
// improving values. The order is total, so the result is independent of the
// input order.
void reduce_to_frontier(std::vector<Candidate>& pts) {
    std::sort(pts.begin(), pts.end(), [](const Candidate& a, const Candidate& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.value != b.value) return a.value > b.value;
        return detail::bits_less(a.bits, b.bits);
    });
    std::size_t out = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (out == 0 || pts[i].value > pts[out - 1].value) pts[out++] = pts[i];
    }
    pts.resize(out);
}

std::vector<Candidate> exact_frontier(const KnapsackInstance& inst, Parallelism par) {
    detail::check_exhaustive_guard(inst);
    const detail::Columns cols(inst);
    const std::int64_t n = std::int64_t{1} << inst.size();
    constexpr std::size_t kMinBuffer = std::size_t{1} << 16;

    const int threads = detail::thread_count(par);
    std::vector<std::vector<Candidate>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
    {
        auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
        std::size_t limit = kMinBuffer;
#pragma omp for schedule(static)
        for (std::int64_t bits = 0; bits < n; ++bits) {
            local.push_back(cols.eval(static_cast<std::uint64_t>(bits)));
            if (local.size() >= limit) {
                reduce_to_frontier(local);
                limit = std::max(kMinBuffer, 2 * local.size());
            }
        }
        reduce_to_frontier(local);
    }
    std::vector<Candidate> all;
    for (auto& p : partial) all.insert(all.end(), p.begin(), p.end());
    reduce_to_frontier(all);
    return all;
}

}  // namespace

std::vector<ParetoPoint> pareto_frontier(const KnapsackInstance& inst, FrontierMode mode, Parallelism par) {
    std::vector<ParetoPoint> out;
    if (mode == FrontierMode::exact) {
        for (const Candidate& c : exact_frontier(inst, par)) out.push_back({inst.evaluate_bits(c.bits), false});
        return out;
    }
    out.push_back({inst.empty_selection(), false});
    for (auto& p : solve_greedy(inst)) out.push_back({std::move(p), false});
    for (auto& p : out) {
        for (const auto& q : out) {
            if (dominates(q.selection, p.selection)) {
                p.dominated = true;
                break;
            }
        }
    }
    return out;
}

bool is_pareto_optimal(const KnapsackInstance& inst, const SelectionResult& selection, Parallelism par) {
    for (const Candidate& c : exact_frontier(inst, par)) {
        if (dominates(inst.evaluate_bits(c.bits), selection)) return false;
    }
    return true;
}

Solver parse_solver(std::string_view name) {
    if (name == "greedy") return Solver::greedy;
    if (name == "dp") return Solver::dp;
    if (name == "exhaustive") return Solver::exhaustive;
    if (name == "mitm") return Solver::mitm;
    throw ConfigError("unknown solver '" + std::string(name) + "' (expected greedy, dp, exhaustive or mitm)");
}

std::string_view to_string(Solver solver) {
    switch (solver) {
        case Solver::greedy: return "greedy";
        case Solver::dp: return "dp";
        case Solver::exhaustive: return "exhaustive";
        case Solver::mitm: return "mitm";
    }
    return "?";
}

SelectionResult solve(const KnapsackInstance& inst, double epsilon, Solver solver, DpOptions dp) {
    switch (solver) {
        case Solver::greedy: {
            const auto prefixes = solve_greedy(inst);
            return select_greedy(inst, prefixes, epsilon);
        }
        case Solver::dp: return solve_dp(inst, epsilon, dp);
        case Solver::exhaustive: return solve_exhaustive(inst, epsilon);
        case Solver::mitm: return solve_mitm(inst, epsilon);
    }
    throw ContractError("unhandled solver");
}

}  // namespace peftsel
