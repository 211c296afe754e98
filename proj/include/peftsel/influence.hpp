// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace peftsel {

/// A named slice of model parameters that is trained or frozen as a unit.
struct ParameterGroup {
    std::string name;
    std::uint64_t size = 1;  // parameter count

    bool operator==(const ParameterGroup&) const = default;
};

/// Loss differences sampled along -multiplier * base_lr * g for one group.
///
/// loss_deltas[j] = L(w - multipliers[j] * base_lr * e_k . g) - L(w).
struct ProbeSet {
    double base_lr = 0.0;
    std::vector<double> multipliers = default_multipliers();
    std::vector<double> loss_deltas;

    static std::vector<double> default_multipliers() { return {-2.0, -1.0, 1.0, 2.0}; }

    /// Throws ContractError when the probe design is unusable.
    void validate() const;
};

/// Least-squares estimate of the per-group loss parabola
/// dL(eta) = -eta * b + eta^2 / 2 * a, where b = G.g and a = g'Hg.
struct QuadraticFit {
    double b = 0.0;
    double a = 0.0;
    double r2 = 0.0;
    bool valid = false;

    bool operator==(const QuadraticFit&) const = default;
};

/// How a fit is converted to a loss-reduction value.
enum class ValueConvention {
    exact_minimum,  // b^2 / (2a), the minimum of the parabola
    doubled,        // b^2 / a, twice the minimum
};

inline constexpr double kMinR2 = 0.99;
// a must exceed this multiple of |b| for a fit to count as valid.
inline constexpr double kCurvatureFloor = 1e-12;

/// True iff b > 0, a > 0 (above the curvature floor) and r2 > 0.99.
bool passes_gate(double b, double a, double r2);

/// Origin-constrained least squares on the probe deltas.
/// Throws ContractError on a malformed or singular probe design and FitError
/// on non-finite loss deltas.
QuadraticFit fit_quadratic(const ProbeSet& probes);

/// b / a. Throws ContractError on an invalid fit.
double optimal_lr(const QuadraticFit& fit);

double reduction_value(const QuadraticFit& fit,
                       ValueConvention convention = ValueConvention::exact_minimum);

/// Per-parameter influence: reduction_value / group.size.
double ppi(const QuadraticFit& fit, const ParameterGroup& group,
           ValueConvention convention = ValueConvention::exact_minimum);

/// Per-group fit results at the iterations where probing ran.
///
/// records()[group][column] is empty when the group was not probed at that
/// iteration; a present-but-invalid fit means the gate rejected it.
class InfluenceTrace {
public:
    InfluenceTrace() = default;
    explicit InfluenceTrace(std::vector<ParameterGroup> groups);

    const std::vector<ParameterGroup>& groups() const { return groups_; }
    const std::vector<std::int64_t>& iterations() const { return iterations_; }
    const std::vector<std::vector<std::optional<QuadraticFit>>>& records() const { return records_; }

    std::size_t group_count() const { return groups_.size(); }
    std::size_t iteration_count() const { return iterations_.size(); }

    /// Index of a group by name; throws ContractError if unknown.
    std::size_t group_index(const std::string& name) const;

    /// Appends a column. iteration must exceed the last one.
    std::size_t add_iteration(std::int64_t iteration);

    /// Stores a fit in the most recent column.
    void record(std::size_t group, QuadraticFit fit);
    void record(std::size_t group, std::size_t column, QuadraticFit fit);

    const std::optional<QuadraticFit>& at(std::size_t group, std::size_t column) const {
        return records_[group][column];
    }

private:
    std::vector<ParameterGroup> groups_;
    std::vector<std::int64_t> iterations_;
    std::vector<std::vector<std::optional<QuadraticFit>>> records_;
};

using GroupScores = std::map<std::string, double>;

/// APPI: sum of ppi over recorded iterations <= upto_iteration.
GroupScores accumulate_appi(const InfluenceTrace& trace, std::int64_t upto_iteration,
                            ValueConvention convention = ValueConvention::exact_minimum);

/// Sum of raw reduction values over recorded iterations <= upto_iteration.
/// This is the quantity comparable to an actual loss drop.
GroupScores accumulate_values(const InfluenceTrace& trace, std::int64_t upto_iteration,
                              ValueConvention convention = ValueConvention::exact_minimum);

/// accumulate_values over the whole trace, ordered like trace.groups().
std::vector<double> cumulative_values(const InfluenceTrace& trace,
                                      ValueConvention convention = ValueConvention::exact_minimum);

}  // namespace peftsel
