// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/influence.hpp"

#include <algorithm>
#include <cmath>

#include "peftsel/error.hpp"

namespace peftsel {

namespace {

void check_shape(const ProbeSet& probes) {
    if (!(probes.base_lr > 0.0) || !std::isfinite(probes.base_lr)) {
        throw ContractError("probe base_lr must be a positive finite number");
    }
    if (probes.multipliers.size() != probes.loss_deltas.size()) {
        throw ContractError("probe multipliers and loss_deltas differ in length");
    }
    if (probes.multipliers.size() < 3) {
        throw ContractError("at least 3 probes are required to fit 2 coefficients and score the fit");
    }
    for (double m : probes.multipliers) {
        if (m == 0.0 || !std::isfinite(m)) throw ContractError("probe multipliers must be finite and nonzero");
    }
}

}  // namespace

void ProbeSet::validate() const {
    check_shape(*this);
    std::vector<double> sorted = multipliers;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ContractError("probe multipliers must be pairwise distinct");
    }
}

bool passes_gate(double b, double a, double r2) {
    return b > 0.0 && a > 0.0 && a > kCurvatureFloor * std::abs(b) && r2 > kMinR2;
}

QuadraticFit fit_quadratic(const ProbeSet& probes) {
    probes.validate();

    // Solve in multiplier units: dL = -B*m + A*m^2/2 with B = b*lr, A = a*lr^2.
    // The regressors are u = -m and v = m^2/2.
    double suu = 0, suv = 0, svv = 0, suy = 0, svy = 0;
    for (std::size_t j = 0; j < probes.multipliers.size(); ++j) {
        const double m = probes.multipliers[j];
        const double y = probes.loss_deltas[j];
        if (!std::isfinite(y)) throw FitError("probe loss delta is not finite");
        const double u = -m;
        const double v = 0.5 * m * m;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suy += u * y;
        svy += v * y;
    }
    const double det = suu * svv - suv * suv;
    if (!(det > 1e-12 * suu * svv)) {
        throw ContractError("singular probe design: the multipliers cannot separate the linear and quadratic terms");
    }

    const double big_b = (svv * suy - suv * svy) / det;
    const double big_a = (suu * svy - suv * suy) / det;

    double mean = 0;
    for (double y : probes.loss_deltas) mean += y;
    mean /= static_cast<double>(probes.loss_deltas.size());
    double ss_res = 0, ss_tot = 0;
    for (std::size_t j = 0; j < probes.multipliers.size(); ++j) {
        const double m = probes.multipliers[j];
        const double y = probes.loss_deltas[j];
        const double r = y - (-big_b * m + 0.5 * big_a * m * m);
        ss_res += r * r;
        ss_tot += (y - mean) * (y - mean);
    }

    QuadraticFit fit;
    const double lr = probes.base_lr;
    fit.b = big_b / lr;
    fit.a = big_a / (lr * lr);
    if (ss_tot > 0) {
        fit.r2 = 1.0 - ss_res / ss_tot;
    } else {
        // Constant deltas: a perfect fit only if they are all zero.
        fit.r2 = ss_res == 0 ? 1.0 : 0.0;
    }
    fit.valid = passes_gate(fit.b, fit.a, fit.r2);
    return fit;
}

double optimal_lr(const QuadraticFit& fit) {
    if (!fit.valid) throw ContractError("optimal_lr requires a valid fit");
    return fit.b / fit.a;
}

double reduction_value(const QuadraticFit& fit, ValueConvention convention) {
    if (!fit.valid) return 0.0;
    const double v = fit.b * fit.b / fit.a;
    return convention == ValueConvention::exact_minimum ? 0.5 * v : v;
}

double ppi(const QuadraticFit& fit, const ParameterGroup& group, ValueConvention convention) {
    return reduction_value(fit, convention) / static_cast<double>(group.size);
}

InfluenceTrace::InfluenceTrace(std::vector<ParameterGroup> groups)
    : groups_(std::move(groups)), records_(groups_.size()) {
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        if (groups_[i].size < 1) throw ContractError("group '" + groups_[i].name + "' has size 0");
        for (std::size_t j = 0; j < i; ++j) {
            if (groups_[j].name == groups_[i].name) {
                throw ContractError("duplicate group name '" + groups_[i].name + "'");
            }
        }
    }
}

std::size_t InfluenceTrace::group_index(const std::string& name) const {
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        if (groups_[i].name == name) return i;
    }
    throw ContractError("unknown group '" + name + "'");
}

std::size_t InfluenceTrace::add_iteration(std::int64_t iteration) {
    if (!iterations_.empty() && iteration <= iterations_.back()) {
        throw ContractError("trace iterations must be strictly increasing");
    }
    iterations_.push_back(iteration);
    for (auto& row : records_) row.emplace_back();
    return iterations_.size() - 1;
}

void InfluenceTrace::record(std::size_t group, QuadraticFit fit) {
    if (iterations_.empty()) throw ContractError("record() before add_iteration()");
    record(group, iterations_.size() - 1, fit);
}

void InfluenceTrace::record(std::size_t group, std::size_t column, QuadraticFit fit) {
    if (group >= groups_.size() || column >= iterations_.size()) {
        throw ContractError("trace record index out of range");
    }
    records_[group][column] = fit;
}

namespace {

template <typename Fn>
GroupScores accumulate(const InfluenceTrace& trace, std::int64_t upto, Fn&& term) {
    if (upto < 0) throw ContractError("upto_iteration must be >= 0");
    GroupScores out;
    for (std::size_t g = 0; g < trace.group_count(); ++g) {
        double sum = 0;
        for (std::size_t c = 0; c < trace.iteration_count() && trace.iterations()[c] <= upto; ++c) {
            if (const auto& rec = trace.at(g, c)) sum += term(*rec, trace.groups()[g]);
        }
        out[trace.groups()[g].name] = sum;
    }
    return out;
}

}  // namespace

GroupScores accumulate_appi(const InfluenceTrace& trace, std::int64_t upto_iteration,
                            ValueConvention convention) {
    return accumulate(trace, upto_iteration, [convention](const QuadraticFit& f, const ParameterGroup& g) {
        return ppi(f, g, convention);
    });
}

GroupScores accumulate_values(const InfluenceTrace& trace, std::int64_t upto_iteration,
                              ValueConvention convention) {
    return accumulate(trace, upto_iteration, [convention](const QuadraticFit& f, const ParameterGroup&) {
        return reduction_value(f, convention);
    });
}

std::vector<double> cumulative_values(const InfluenceTrace& trace, ValueConvention convention) {
    std::vector<double> out(trace.group_count(), 0.0);
    for (std::size_t g = 0; g < trace.group_count(); ++g) {
        for (std::size_t c = 0; c < trace.iteration_count(); ++c) {
            if (const auto& rec = trace.at(g, c)) out[g] += reduction_value(*rec, convention);
        }
    }
    return out;
}

}  // namespace peftsel
