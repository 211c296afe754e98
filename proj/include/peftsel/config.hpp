// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peftsel/influence.hpp"
#include "peftsel/knapsack.hpp"
#include "peftsel/simulator.hpp"

namespace peftsel {

/// Declarative group description used by configs and presets. The start
/// point is the origin and the target sits at distance offset_norm along an
/// alternating-sign diagonal, unless explicit vectors are given.
struct GroupConfig {
    std::string name;
    std::uint64_t size = 1;
    std::size_t dim = 1;
    double curvature = 1.0;
    double offset_norm = 0.0;
    std::vector<double> target;   // optional, overrides offset_norm
    std::vector<double> initial;  // optional, defaults to zeros
};

struct ModelConfig {
    std::string name = "model";
    std::vector<GroupConfig> groups;
    double noise_sigma = 0.0;
    double quartic = 0.0;
};

/// Everything a CLI command needs, parsed from one JSON document:
///
///   {
///     "model": {"preset": "planted8", "noise_sigma": 0.05}        // or
///     "model": {"name": "m", "groups": [{"name": "g1", "size": 100, "dim": 4,
///                "curvature": 2.0, "offset_norm": 1.0}], "noise_sigma": 0.0},
///     "training": {"iterations": 200, "lazy_period": 32, "seed": 1,
///                  "mode": "simultaneous", "mask": ["g1"], "fallback_lr": 0.01,
///                  "budget_fraction": 0.1},
///     "selection": {"epsilon": 0.05, "solver": "greedy", "dp_divisor": 1},
///     "value_convention": "exact"
///   }
struct RunConfig {
    ModelConfig model;
    TrainingOptions training;
    std::uint64_t seed = 0;
    std::optional<std::vector<std::string>> mask;  // empty optional: all groups
    double budget_fraction = 0.1;
    double epsilon = 0.1;
    Solver solver = Solver::greedy;
    std::uint64_t dp_divisor = 1;

    SyntheticModel build_model() const;
    TrainingMask training_mask(const SyntheticModel& model) const;
};

/// Offset norm that gives a group the requested initial loss.
double offset_norm_for_loss(double curvature, double loss);

SyntheticModel build_model(const ModelConfig& config, std::uint64_t seed);

/// Built-in models:
///   planted8        8 groups; g3 and g7 carry over 90% of the initial loss
///                   and have the smallest sizes (designed epsilon 0.05)
///   planted8-large  planted8 with 10x dimensions and sizes
///   frontier6       6 groups with losses {40,50,60,70,80,90} and sizes
///                   {8,12,20,30,45,70}
std::optional<ModelConfig> preset(std::string_view name);
std::vector<std::string> preset_names();

inline constexpr double kPlanted8Epsilon = 0.05;

/// Throws ConfigError on malformed input and GuardError when the chosen
/// solver cannot handle the model's group count.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

ValueConvention parse_convention(std::string_view name);
UpdateMode parse_mode(std::string_view name);

/// Guard check for a solver against an item count, as raised at config load.
void check_solver_guard(Solver solver, std::size_t item_count);

}  // namespace peftsel
