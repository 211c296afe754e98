// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "peftsel/error.hpp"

namespace peftsel {

using nlohmann::json;

double offset_norm_for_loss(double curvature, double loss) { return std::sqrt(2.0 * loss / curvature); }

SyntheticModel build_model(const ModelConfig& config, std::uint64_t seed) {
    std::vector<GroupSpec> specs;
    for (const auto& g : config.groups) {
        GroupSpec s;
        s.group = {g.name, g.size};
        s.curvature = g.curvature;
        if (!g.target.empty()) {
            s.target = g.target;
        } else {
            if (g.dim == 0) throw ConfigError("group '" + g.name + "' needs dim >= 1");
            const double c = g.offset_norm / std::sqrt(static_cast<double>(g.dim));
            for (std::size_t i = 0; i < g.dim; ++i) s.target.push_back(i % 2 == 0 ? c : -c);
        }
        s.initial = g.initial.empty() ? std::vector<double>(s.target.size(), 0.0) : g.initial;
        specs.push_back(std::move(s));
    }
    try {
        return SyntheticModel(config.name, std::move(specs), config.noise_sigma, seed, config.quartic);
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
}

namespace {

struct PresetGroup {
    const char* name;
    std::uint64_t size;
    double curvature;
    double loss;
};

ModelConfig planted8(std::size_t scale) {
    static constexpr PresetGroup kGroups[] = {
        {"g1", 1024, 1.0, 1.0},  {"g2", 1024, 2.0, 2.0}, {"g3", 128, 4.0, 60.0},  {"g4", 1024, 0.5, 0.5},
        {"g5", 1024, 1.5, 1.5},  {"g6", 1024, 3.0, 3.0}, {"g7", 128, 2.5, 48.0},  {"g8", 1024, 0.8, 1.2},
    };
    ModelConfig m;
    m.name = scale == 1 ? "planted8" : "planted8-large";
    m.noise_sigma = 0.01;
    for (const auto& g : kGroups) {
        m.groups.push_back({g.name, g.size * scale, 4 * scale, g.curvature, offset_norm_for_loss(g.curvature, g.loss),
                            {}, {}});
    }
    return m;
}

ModelConfig frontier6() {
    static constexpr PresetGroup kGroups[] = {
        {"h1", 8, 1.0, 40.0},  {"h2", 12, 2.0, 50.0}, {"h3", 20, 0.5, 60.0},
        {"h4", 30, 1.5, 70.0}, {"h5", 45, 3.0, 80.0}, {"h6", 70, 1.0, 90.0},
    };
    ModelConfig m;
    m.name = "frontier6";
    for (const auto& g : kGroups) {
        m.groups.push_back({g.name, g.size, 4, g.curvature, offset_norm_for_loss(g.curvature, g.loss), {}, {}});
    }
    return m;
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (ok.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

ModelConfig parse_model(const json& j) {
    check_keys(j, {"preset", "name", "groups", "noise_sigma", "quartic"}, "model");
    ModelConfig m;
    if (j.contains("preset")) {
        const auto name = get<std::string>(j, "preset", "model");
        auto p = preset(name);
        if (!p) throw ConfigError("unknown preset '" + name + "'");
        if (j.contains("groups")) throw ConfigError("model: 'preset' and 'groups' are mutually exclusive");
        m = std::move(*p);
    } else {
        if (!j.contains("groups")) throw ConfigError("model needs either 'preset' or 'groups'");
        const json& groups = j.at("groups");
        if (!groups.is_array() || groups.empty()) throw ConfigError("model.groups must be a nonempty array");
        for (const auto& gj : groups) {
            check_keys(gj, {"name", "size", "dim", "curvature", "offset_norm", "loss", "target", "initial"},
                       "model.groups[]");
            GroupConfig g;
            g.name = get<std::string>(gj, "name", "model.groups[]");
            g.size = get<std::uint64_t>(gj, "size", "model.groups[" + g.name + "]");
            g.curvature = gj.contains("curvature") ? get<double>(gj, "curvature", g.name) : 1.0;
            g.dim = gj.contains("dim") ? get<std::size_t>(gj, "dim", g.name) : 1;
            if (gj.contains("target")) g.target = get<std::vector<double>>(gj, "target", g.name);
            if (gj.contains("initial")) g.initial = get<std::vector<double>>(gj, "initial", g.name);
            if (gj.contains("offset_norm") && gj.contains("loss")) {
                throw ConfigError("group '" + g.name + "': give offset_norm or loss, not both");
            }
            if (gj.contains("offset_norm")) g.offset_norm = get<double>(gj, "offset_norm", g.name);
            if (gj.contains("loss")) {
                if (!(g.curvature > 0)) throw ConfigError("group '" + g.name + "' needs a positive curvature");
                g.offset_norm = offset_norm_for_loss(g.curvature, get<double>(gj, "loss", g.name));
            }
            m.groups.push_back(std::move(g));
        }
    }
    if (j.contains("name")) m.name = get<std::string>(j, "name", "model");
    if (j.contains("noise_sigma")) m.noise_sigma = get<double>(j, "noise_sigma", "model");
    if (j.contains("quartic")) m.quartic = get<double>(j, "quartic", "model");
    return m;
}

}  // namespace

std::optional<ModelConfig> preset(std::string_view name) {
    if (name == "planted8") return planted8(1);
    if (name == "planted8-large") return planted8(10);
    if (name == "frontier6") return frontier6();
    return std::nullopt;
}

std::vector<std::string> preset_names() { return {"planted8", "planted8-large", "frontier6"}; }

ValueConvention parse_convention(std::string_view name) {
    if (name == "exact") return ValueConvention::exact_minimum;
    if (name == "doubled") return ValueConvention::doubled;
    throw ConfigError("unknown value convention '" + std::string(name) + "' (expected exact or doubled)");
}

UpdateMode parse_mode(std::string_view name) {
    if (name == "simultaneous") return UpdateMode::simultaneous;
    if (name == "sequential") return UpdateMode::sequential;
    throw ConfigError("unknown update mode '" + std::string(name) + "' (expected simultaneous or sequential)");
}

void check_solver_guard(Solver solver, std::size_t item_count) {
    if (solver == Solver::exhaustive && item_count > kExhaustiveMaxItems) {
        throw GuardError("exhaustive solver supports at most " + std::to_string(kExhaustiveMaxItems) + " groups, got " +
                         std::to_string(item_count));
    }
    if (solver == Solver::mitm && item_count > kMitmMaxItems) {
        throw GuardError("mitm solver supports at most " + std::to_string(kMitmMaxItems) + " groups, got " +
                         std::to_string(item_count));
    }
}

RunConfig parse_config(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, {"model", "training", "selection", "value_convention"}, "config");
    if (!root.contains("model")) throw ConfigError("config needs a 'model' object");

    RunConfig cfg;
    cfg.model = parse_model(root.at("model"));

    if (root.contains("training")) {
        const json& t = root.at("training");
        check_keys(t, {"iterations", "lazy_period", "seed", "mode", "mask", "fallback_lr", "budget_fraction"},
                   "training");
        if (t.contains("iterations")) cfg.training.iterations = get<std::int64_t>(t, "iterations", "training");
        if (t.contains("lazy_period")) cfg.training.lazy_period = get<std::int64_t>(t, "lazy_period", "training");
        if (t.contains("seed")) cfg.seed = get<std::uint64_t>(t, "seed", "training");
        if (t.contains("mode")) cfg.training.mode = parse_mode(get<std::string>(t, "mode", "training"));
        if (t.contains("fallback_lr")) cfg.training.fallback_lr = get<double>(t, "fallback_lr", "training");
        if (t.contains("budget_fraction")) cfg.budget_fraction = get<double>(t, "budget_fraction", "training");
        if (t.contains("mask")) cfg.mask = get<std::vector<std::string>>(t, "mask", "training");
    }
    if (root.contains("selection")) {
        const json& s = root.at("selection");
        check_keys(s, {"epsilon", "solver", "dp_divisor"}, "selection");
        if (s.contains("epsilon")) cfg.epsilon = get<double>(s, "epsilon", "selection");
        if (s.contains("solver")) cfg.solver = parse_solver(get<std::string>(s, "solver", "selection"));
        if (s.contains("dp_divisor")) cfg.dp_divisor = get<std::uint64_t>(s, "dp_divisor", "selection");
    }
    if (root.contains("value_convention")) {
        cfg.training.convention = parse_convention(get<std::string>(root, "value_convention", "config"));
    }

    if (cfg.training.iterations < 0) throw ConfigError("training.iterations must be >= 0");
    if (cfg.training.lazy_period < 0) throw ConfigError("training.lazy_period must be >= 1");
    if (!(cfg.training.fallback_lr > 0)) throw ConfigError("training.fallback_lr must be positive");
    if (!(cfg.budget_fraction > 0 && cfg.budget_fraction <= 1)) {
        throw ConfigError("training.budget_fraction must lie in (0, 1]");
    }
    if (!(cfg.epsilon >= 0 && cfg.epsilon <= 1)) throw ConfigError("selection.epsilon must lie in [0, 1]");
    if (cfg.dp_divisor == 0) throw ConfigError("selection.dp_divisor must be >= 1");

    std::set<std::string> names;
    for (const auto& g : cfg.model.groups) names.insert(g.name);
    if (cfg.mask) {
        for (const auto& n : *cfg.mask) {
            if (names.count(n) == 0) throw ConfigError("training.mask names unknown group '" + n + "'");
        }
    }
    check_solver_guard(cfg.solver, cfg.model.groups.size());
    cfg.build_model();  // surfaces model errors at load time
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SyntheticModel RunConfig::build_model() const { return peftsel::build_model(model, seed); }

TrainingMask RunConfig::training_mask(const SyntheticModel& m) const {
    if (!mask) return TrainingMask::all(m);
    TrainingMask out;
    out.active.insert(mask->begin(), mask->end());
    return out;
}

}  // namespace peftsel
