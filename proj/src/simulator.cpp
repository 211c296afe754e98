// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/simulator.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "peftsel/error.hpp"

namespace peftsel {

SyntheticModel::SyntheticModel(std::string name, std::vector<GroupSpec> groups, double noise_sigma,
                               std::uint64_t seed, double quartic)
    : name_(std::move(name)), groups_(std::move(groups)), seed_(seed), quartic_(quartic) {
    set_noise_sigma(noise_sigma);
    if (!std::isfinite(quartic_) || quartic_ < 0) throw ContractError("quartic coefficient must be finite and >= 0");
    for (std::size_t k = 0; k < groups_.size(); ++k) {
        const GroupSpec& g = groups_[k];
        if (g.group.size < 1) throw ContractError("group '" + g.group.name + "' has size 0");
        if (g.dim() == 0) throw ContractError("group '" + g.group.name + "' has dimension 0");
        if (g.initial.size() != g.dim()) {
            throw ContractError("group '" + g.group.name + "' initial point and target differ in length");
        }
        if (!(g.curvature > 0) || !std::isfinite(g.curvature)) {
            throw ContractError("group '" + g.group.name + "' needs a positive finite curvature");
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (groups_[j].group.name == g.group.name) {
                throw ContractError("duplicate group name '" + g.group.name + "'");
            }
        }
        params_.push_back(g.initial);
    }
}

std::size_t SyntheticModel::group_index(const std::string& name) const {
    for (std::size_t k = 0; k < groups_.size(); ++k) {
        if (groups_[k].group.name == name) return k;
    }
    throw ContractError("model '" + name_ + "' has no group '" + name + "'");
}

std::vector<ParameterGroup> SyntheticModel::parameter_groups() const {
    std::vector<ParameterGroup> out;
    out.reserve(groups_.size());
    for (const auto& g : groups_) out.push_back(g.group);
    return out;
}

void SyntheticModel::set_noise_sigma(double sigma) {
    if (!(sigma >= 0) || !std::isfinite(sigma)) throw ContractError("noise sigma must be finite and >= 0");
    noise_sigma_ = sigma;
}

double SyntheticModel::group_loss(std::size_t k, std::span<const double> w) const {
    const GroupSpec& g = groups_.at(k);
    double quad = 0, quart = 0;
    for (std::size_t i = 0; i < g.dim(); ++i) {
        const double d = w[i] - g.target[i];
        quad += d * d;
        quart += d * d * d * d;
    }
    return 0.5 * g.curvature * quad + 0.25 * quartic_ * quart;
}

double standard_normal(NoiseEngine& engine) {
    constexpr double kScale = 0x1.0p-53;
    const double u1 = (static_cast<double>(engine() >> 11) + 1.0) * kScale;  // (0, 1]
    const double u2 = static_cast<double>(engine() >> 11) * kScale;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double loss(const SyntheticModel& model) {
    double total = 0;
    for (std::size_t k = 0; k < model.group_count(); ++k) total += model.group_loss(k);
    return total;
}

Gradient exact_gradient(const SyntheticModel& model) {
    Gradient g(model.group_count());
    for (std::size_t k = 0; k < model.group_count(); ++k) {
        const GroupSpec& spec = model.groups()[k];
        const auto& w = model.parameters()[k];
        g[k].resize(spec.dim());
        for (std::size_t i = 0; i < spec.dim(); ++i) {
            const double d = w[i] - spec.target[i];
            g[k][i] = spec.curvature * d + model.quartic() * d * d * d;
        }
    }
    return g;
}

Gradient gradient(const SyntheticModel& model, NoiseEngine& engine) {
    Gradient g = exact_gradient(model);
    const double sigma = model.noise_sigma();
    if (sigma == 0) return g;
    for (auto& gk : g) {
        for (double& x : gk) x += sigma * standard_normal(engine);
    }
    return g;
}

ProbeSet probe_losses(const SyntheticModel& model, const Gradient& g, std::size_t group, double base_lr,
                      std::span<const double> multipliers) {
    if (!(base_lr > 0)) throw ContractError("probe base_lr must be positive");
    if (group >= model.group_count()) throw ContractError("probe group index out of range");
    const auto& w = model.parameters()[group];
    const auto& gk = g.at(group);
    if (gk.size() != w.size()) throw ContractError("gradient shape does not match the model");

    // Only group k moves, so L(w') - L(w) reduces to the group's own term.
    const double base = model.group_loss(group);
    ProbeSet probes;
    probes.base_lr = base_lr;
    probes.multipliers.assign(multipliers.begin(), multipliers.end());
    probes.loss_deltas.reserve(multipliers.size());
    std::vector<double> moved(w.size());
    for (double m : multipliers) {
        const double eta = m * base_lr;
        for (std::size_t i = 0; i < w.size(); ++i) moved[i] = w[i] - eta * gk[i];
        probes.loss_deltas.push_back(model.group_loss(group, moved) - base);
    }
    return probes;
}

ProbeSet probe_losses(const SyntheticModel& model, const Gradient& g, const std::string& group, double base_lr) {
    const auto multipliers = ProbeSet::default_multipliers();
    return probe_losses(model, g, model.group_index(group), base_lr, multipliers);
}

TrainingMask TrainingMask::all(const SyntheticModel& model) {
    TrainingMask m;
    for (const auto& g : model.groups()) m.active.insert(g.group.name);
    return m;
}

RunRecord run_training(SyntheticModel model, const TrainingMask& mask, const TrainingOptions& options) {
    if (options.iterations < 0) throw ContractError("iteration count must be >= 0");
    if (options.lazy_period < 0) throw ContractError("lazy_period must be >= 1 (or 0 for the 4K default)");
    if (!(options.fallback_lr > 0)) throw ContractError("fallback learning rate must be positive");
    for (const auto& name : mask.active) model.group_index(name);

    const std::size_t k_count = model.group_count();
    const std::int64_t lazy =
        options.lazy_period > 0 ? options.lazy_period : std::max<std::int64_t>(1, 4 * static_cast<std::int64_t>(k_count));

    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < k_count; ++k) {
        if (mask.contains(model.groups()[k].group.name)) active.push_back(k);
    }

    RunRecord rec;
    rec.trace = InfluenceTrace(model.parameter_groups());
    rec.cumulative_values.assign(k_count, 0.0);
    rec.losses.reserve(static_cast<std::size_t>(options.iterations) + 1);
    rec.losses.push_back(loss(model));

    std::vector<std::optional<double>> fitted_lr(k_count);
    std::vector<std::optional<std::int64_t>> last_probe(k_count);
    NoiseEngine engine(model.seed());
    std::vector<std::size_t> moving;
    std::vector<std::size_t> probing;

    for (std::int64_t t = 0; t < options.iterations; ++t) {
        const Gradient g = gradient(model, engine);

        moving.clear();
        if (!active.empty()) {
            if (options.mode == UpdateMode::simultaneous) {
                moving = active;
            } else {
                moving.push_back(active[static_cast<std::size_t>(t) % active.size()]);
            }
        }

        // A moving group is probed on its first move and again once `lazy`
        // iterations have passed since its last probe.
        probing.clear();
        for (std::size_t k : moving) {
            if (!last_probe[k] || t - *last_probe[k] >= lazy) probing.push_back(k);
        }
        if (!probing.empty()) {
            const std::size_t col = rec.trace.add_iteration(t);
            for (std::size_t k : probing) {
                last_probe[k] = t;
                const double base_lr = fitted_lr[k].value_or(options.fallback_lr);
                QuadraticFit fit;
                try {
                    fit = fit_quadratic(probe_losses(model, g, k, base_lr, options.multipliers));
                } catch (const FitError&) {
                    fit = QuadraticFit{};
                }
                rec.trace.record(k, col, fit);
                if (fit.valid) {
                    rec.cumulative_values[k] += reduction_value(fit, options.convention);
                    fitted_lr[k] = optimal_lr(fit);
                }
            }
        }

        std::vector<double> step(k_count, 0.0);
        for (std::size_t k : moving) {
            const double lr = fitted_lr[k].value_or(options.fallback_lr);
            auto& w = model.group_parameters(k);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[k][i];
            step[k] = lr;
        }
        rec.lr_history.push_back(std::move(step));
        rec.losses.push_back(loss(model));
    }

    rec.final_parameters = model.parameters();
    return rec;
}

namespace {

void check_same_names(const std::vector<ParameterGroup>& a, const SyntheticModel& large) {
    std::set<std::string> lhs, rhs;
    for (const auto& g : a) lhs.insert(g.name);
    for (const auto& g : large.groups()) rhs.insert(g.group.name);
    if (lhs != rhs) {
        throw CompatibilityError("small and large models do not define the same parameter group names");
    }
}

}  // namespace

KnapsackInstance transfer_instance(const std::vector<ParameterGroup>& source_groups,
                                   std::span<const double> source_values, const SyntheticModel& large) {
    if (source_groups.size() != source_values.size()) {
        throw ContractError("one value per source group is required");
    }
    check_same_names(source_groups, large);
    std::vector<Item> items;
    for (const auto& spec : large.groups()) {
        for (std::size_t i = 0; i < source_groups.size(); ++i) {
            if (source_groups[i].name == spec.group.name) {
                items.push_back({spec.group.name, source_values[i], spec.group.size});
                break;
            }
        }
    }
    return KnapsackInstance(std::move(items));
}

TrainingMask greedy_mask(const KnapsackInstance& inst, double epsilon, SelectionResult* selection) {
    const auto prefixes = solve_greedy(inst);
    SelectionResult chosen = select_greedy(inst, prefixes, epsilon);
    TrainingMask mask;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        if (chosen.mask[i]) mask.active.insert(inst.items()[i].name);
    }
    if (selection != nullptr) *selection = std::move(chosen);
    return mask;
}

TransferResult run_transfer(const SyntheticModel& small, const SyntheticModel& large, const TransferOptions& options) {
    check_same_names(small.parameter_groups(), large);
    if (!(options.budget_fraction > 0 && options.budget_fraction <= 1)) {
        throw ContractError("budget_fraction must lie in (0, 1]");
    }
    if (options.iterations < 0) throw ContractError("iteration count must be >= 0");

    TrainingOptions small_opts = options.training;
    small_opts.iterations =
        static_cast<std::int64_t>(std::floor(options.budget_fraction * static_cast<double>(options.iterations)));
    RunRecord small_run = run_training(small, TrainingMask::all(small), small_opts);

    KnapsackInstance inst = transfer_instance(small.parameter_groups(), small_run.cumulative_values, large);
    SelectionResult selection;
    TrainingMask mask = greedy_mask(inst, options.epsilon, &selection);

    TrainingOptions large_opts = options.training;
    large_opts.iterations = options.iterations;
    RunRecord large_run = run_training(large, mask, large_opts);

    return TransferResult{std::move(mask), std::move(inst), std::move(selection), std::move(small_run),
                          std::move(large_run)};
}

}  // namespace peftsel
