// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "peftsel/influence.hpp"
#include "peftsel/knapsack.hpp"

namespace peftsel {

/// One group of a synthetic model: loss 1/2 c ||w - target||^2 (+ quartic term).
struct GroupSpec {
    ParameterGroup group;
    double curvature = 1.0;
    std::vector<double> target;
    std::vector<double> initial;  // same length as target

    std::size_t dim() const { return target.size(); }
};

/// Separable synthetic objective with known gradient and diagonal curvature:
///
///   L(w) = sum_k 1/2 c_k ||w_k - t_k||^2 + quartic/4 * sum_k sum_i (w_ki - t_ki)^4
///
/// With quartic = 0 the Hessian of group k is c_k * I, so g'Hg is exact.
class SyntheticModel {
public:
    SyntheticModel(std::string name, std::vector<GroupSpec> groups, double noise_sigma = 0.0,
                   std::uint64_t seed = 0, double quartic = 0.0);

    const std::string& name() const { return name_; }
    const std::vector<GroupSpec>& groups() const { return groups_; }
    std::size_t group_count() const { return groups_.size(); }
    std::size_t group_index(const std::string& name) const;
    std::vector<ParameterGroup> parameter_groups() const;

    const std::vector<std::vector<double>>& parameters() const { return params_; }
    std::vector<double>& group_parameters(std::size_t k) { return params_.at(k); }

    double noise_sigma() const { return noise_sigma_; }
    void set_noise_sigma(double sigma);
    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    double quartic() const { return quartic_; }

    /// Loss of group k evaluated at an arbitrary point w_k.
    double group_loss(std::size_t k, std::span<const double> w) const;
    double group_loss(std::size_t k) const { return group_loss(k, params_[k]); }

private:
    std::string name_;
    std::vector<GroupSpec> groups_;
    std::vector<std::vector<double>> params_;
    double noise_sigma_ = 0.0;
    std::uint64_t seed_ = 0;
    double quartic_ = 0.0;
};

using Gradient = std::vector<std::vector<double>>;
using NoiseEngine = std::mt19937_64;

/// Box-Muller draw from the engine's raw 64-bit output (two draws per call).
double standard_normal(NoiseEngine& engine);

double loss(const SyntheticModel& model);

/// Noiseless gradient G.
Gradient exact_gradient(const SyntheticModel& model);

/// G + sigma * z with z standard normal, drawn group by group, coordinate by
/// coordinate. No draws are made when sigma == 0.
Gradient gradient(const SyntheticModel& model, NoiseEngine& engine);

/// Loss deltas for moving only group k by -m * base_lr * g_k. The model is
/// not modified.
ProbeSet probe_losses(const SyntheticModel& model, const Gradient& g, std::size_t group, double base_lr,
                      std::span<const double> multipliers);
ProbeSet probe_losses(const SyntheticModel& model, const Gradient& g, const std::string& group, double base_lr);

/// Names of the groups allowed to train.
struct TrainingMask {
    std::set<std::string> active;

    static TrainingMask all(const SyntheticModel& model);
    bool contains(const std::string& name) const { return active.count(name) != 0; }
    bool operator==(const TrainingMask&) const = default;
};

enum class UpdateMode {
    simultaneous,  // every active group moves every iteration
    sequential,    // one active group per iteration, round robin
};

struct TrainingOptions {
    std::int64_t iterations = 1;
    // A group is re-probed once lazy_period iterations have passed since its
    // last probe (and always on its first move); 0 means 4K.
    std::int64_t lazy_period = 0;
    UpdateMode mode = UpdateMode::simultaneous;
    double fallback_lr = 1e-2;
    ValueConvention convention = ValueConvention::exact_minimum;
    std::vector<double> multipliers = ProbeSet::default_multipliers();
};

struct RunRecord {
    std::vector<double> losses;  // iterations + 1 entries, losses[0] = L(w_0)
    InfluenceTrace trace;
    std::vector<std::vector<double>> final_parameters;
    // lr_history[t][k]: step size applied to group k at iteration t (0 if it did not move).
    std::vector<std::vector<double>> lr_history;
    // Sum of reduction values per group, in model group order.
    std::vector<double> cumulative_values;
};

/// Trains with per-group fitted learning rates, probing lazily. Frozen groups
/// never move. Divergence shows up in losses; it does not throw.
RunRecord run_training(SyntheticModel model, const TrainingMask& mask, const TrainingOptions& options);

struct TransferOptions {
    double budget_fraction = 0.1;
    double epsilon = 0.1;
    std::int64_t iterations = 100;
    TrainingOptions training;  // iterations is overridden per run
};

struct TransferResult {
    TrainingMask mask;
    KnapsackInstance instance;
    SelectionResult selection;
    RunRecord small_run;
    RunRecord large_run;
};

/// Values keyed by group name against the large model's sizes, in the large
/// model's group order. Throws CompatibilityError on a name mismatch.
KnapsackInstance transfer_instance(const std::vector<ParameterGroup>& source_groups,
                                   std::span<const double> source_values, const SyntheticModel& large);

/// Greedy prefix selection under epsilon, as a mask of group names.
TrainingMask greedy_mask(const KnapsackInstance& inst, double epsilon, SelectionResult* selection = nullptr);

/// Short full-model run on `small`, greedy selection weighted by `large`'s
/// group sizes, then a masked run on `large`.
TransferResult run_transfer(const SyntheticModel& small, const SyntheticModel& large, const TransferOptions& options);

}  // namespace peftsel
