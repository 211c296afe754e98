// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "peftsel/config.hpp"
#include "peftsel/error.hpp"
#include "peftsel/knapsack.hpp"
#include "peftsel/simulator.hpp"
#include "peftsel/traces.hpp"

namespace peftsel::cli {

namespace {

using nlohmann::ordered_json;

constexpr std::int64_t kAllIterations = std::numeric_limits<std::int64_t>::max();

RunConfig load_with_env(const std::string& path) {
    RunConfig cfg = load_config(path);
    if (const char* env = std::getenv("ADAPEFT_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t seed = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, seed);
        if (res.ec != std::errc() || res.ptr != end) {
            throw ConfigError(std::string("ADAPEFT_SEED is not an unsigned integer: '") + env + "'");
        }
        cfg.seed = seed;
    }
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::string join_selected(const KnapsackInstance& inst, const std::vector<bool>& mask) {
    std::string out;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        if (!mask[i]) continue;
        if (!out.empty()) out += ',';
        out += inst.items()[i].name;
    }
    return out.empty() ? "-" : out;
}

ordered_json selected_json(const KnapsackInstance& inst, const std::vector<bool>& mask) {
    ordered_json names = ordered_json::array();
    for (std::size_t i = 0; i < inst.size(); ++i) {
        if (mask[i]) names.push_back(inst.items()[i].name);
    }
    return names;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    bool json = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const RunConfig cfg = load_with_env(a.config);
    const SyntheticModel model = cfg.build_model();
    const RunRecord rec = run_training(model, cfg.training_mask(model), cfg.training);
    write_trace(a.out, to_trace_file(rec.trace, model.name()));

    const GroupScores appi = accumulate_appi(rec.trace, kAllIterations, cfg.training.convention);
    std::vector<std::size_t> order(model.group_count());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&rec](std::size_t x, std::size_t y) {
        return rec.cumulative_values[x] > rec.cumulative_values[y];
    });

    const double initial = rec.losses.front();
    const double final_loss = rec.losses.back();
    if (a.json) {
        ordered_json j;
        j["model"] = model.name();
        j["iterations"] = cfg.training.iterations;
        j["seed"] = cfg.seed;
        j["trace"] = a.out;
        j["initial_loss"] = initial;
        j["final_loss"] = final_loss;
        j["groups"] = ordered_json::array();
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            const auto& g = model.groups()[order[rank]].group;
            j["groups"].push_back({{"rank", rank + 1},
                                   {"name", g.name},
                                   {"size", g.size},
                                   {"cum_value", rec.cumulative_values[order[rank]]},
                                   {"appi", appi.at(g.name)}});
        }
        out << j.dump(2) << '\n';
        return kOk;
    }
    out << "model: " << model.name() << '\n'
        << "iterations: " << cfg.training.iterations << '\n'
        << "seed: " << cfg.seed << '\n'
        << "trace: " << a.out << '\n'
        << "initial_loss: " << format_real(initial) << '\n'
        << "final_loss: " << format_real(final_loss) << '\n'
        << "rank\tgroup\tsize\tcum_value\tappi\n";
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto& g = model.groups()[order[rank]].group;
        out << rank + 1 << '\t' << g.name << '\t' << g.size << '\t' << format_real(rec.cumulative_values[order[rank]])
            << '\t' << format_real(appi.at(g.name)) << '\n';
    }
    return kOk;
}

// --- select ----------------------------------------------------------------

struct SelectArgs {
    std::string trace;
    double epsilon = 0;
    std::string solver = "greedy";
    std::string convention = "exact";
    std::uint64_t dp_divisor = 1;
    bool json = false;
};

int cmd_select(const SelectArgs& a, std::ostream& out) {
    const TraceFile file = read_trace(a.trace);
    const KnapsackInstance inst = instance_from_trace(file, parse_convention(a.convention));
    const Solver solver = parse_solver(a.solver);
    check_solver_guard(solver, inst.size());
    DpOptions dp;
    dp.weight_divisor = a.dp_divisor;
    const SelectionResult sel = solve(inst, a.epsilon, solver, dp);

    // Pareto status is reported for exact solvers whenever a full scan is affordable.
    std::optional<bool> pareto;
    if (solver != Solver::greedy && inst.size() <= kExhaustiveMaxItems) pareto = is_pareto_optimal(inst, sel);

    if (a.json) {
        ordered_json j;
        j["solver"] = std::string(to_string(solver));
        j["epsilon"] = a.epsilon;
        j["capacity"] = inst.capacity(a.epsilon);
        j["total_weight_all"] = inst.total_weight();
        j["selected"] = selected_json(inst, sel.mask);
        j["mask"] = sel.mask;
        j["total_value"] = sel.total_value;
        j["total_weight"] = sel.total_weight;
        j["fraction"] = sel.fraction;
        j["pareto_optimal"] = pareto ? ordered_json(*pareto) : ordered_json(nullptr);
        out << j.dump(2) << '\n';
        return kOk;
    }
    out << "solver: " << to_string(solver) << '\n'
        << "epsilon: " << format_real(a.epsilon) << '\n'
        << "capacity: " << inst.capacity(a.epsilon) << " of " << inst.total_weight() << '\n'
        << "selected: " << join_selected(inst, sel.mask) << '\n'
        << "total_value: " << format_real(sel.total_value) << '\n'
        << "total_weight: " << sel.total_weight << '\n'
        << "fraction: " << format_real(sel.fraction) << '\n';
    if (solver != Solver::greedy) out << "pareto_optimal: " << (pareto ? (*pareto ? "yes" : "no") : "unknown") << '\n';
    return kOk;
}

// --- frontier --------------------------------------------------------------

struct FrontierArgs {
    std::string trace;
    std::string mode = "exact";
    std::string convention = "exact";
    bool json = false;
};

int cmd_frontier(const FrontierArgs& a, std::ostream& out) {
    const TraceFile file = read_trace(a.trace);
    const KnapsackInstance inst = instance_from_trace(file, parse_convention(a.convention));
    const bool exact = a.mode == "exact";
    if (exact) check_solver_guard(Solver::exhaustive, inst.size());

    std::vector<ParetoPoint> exact_pts;
    if (exact) exact_pts = pareto_frontier(inst, FrontierMode::exact);
    const std::vector<ParetoPoint> greedy_pts = pareto_frontier(inst, FrontierMode::greedy);

    // Best exact value at equal-or-lower weight; the frontier is sorted by weight.
    auto exact_at = [&exact_pts](std::uint64_t weight) {
        double best = 0;
        for (const auto& p : exact_pts) {
            if (p.selection.total_weight > weight) break;
            best = p.selection.total_value;
        }
        return best;
    };

    if (a.json) {
        ordered_json j;
        j["mode"] = a.mode;
        j["total_weight"] = inst.total_weight();
        auto rows = [&](const std::vector<ParetoPoint>& pts, bool with_exact) {
            ordered_json arr = ordered_json::array();
            for (const auto& p : pts) {
                ordered_json r;
                r["weight"] = p.selection.total_weight;
                r["fraction"] = p.selection.fraction;
                r["value"] = p.selection.total_value;
                r["dominated"] = p.dominated;
                r["groups"] = selected_json(inst, p.selection.mask);
                if (with_exact) r["exact_at_weight"] = exact_at(p.selection.total_weight);
                arr.push_back(std::move(r));
            }
            return arr;
        };
        if (exact) j["exact"] = rows(exact_pts, false);
        j["greedy"] = rows(greedy_pts, exact);
        out << j.dump(2) << '\n';
        return kOk;
    }

    out << "kind\tweight\tfraction\tvalue\tdominated\texact_at_weight\tgroups\n";
    for (const auto& p : exact_pts) {
        out << "exact\t" << p.selection.total_weight << '\t' << format_real(p.selection.fraction) << '\t'
            << format_real(p.selection.total_value) << '\t' << (p.dominated ? 1 : 0) << "\t-\t"
            << join_selected(inst, p.selection.mask) << '\n';
    }
    for (const auto& p : greedy_pts) {
        out << "greedy\t" << p.selection.total_weight << '\t' << format_real(p.selection.fraction) << '\t'
            << format_real(p.selection.total_value) << '\t' << (p.dominated ? 1 : 0) << '\t'
            << (exact ? format_real(exact_at(p.selection.total_weight)) : std::string("-")) << '\t'
            << join_selected(inst, p.selection.mask) << '\n';
    }
    return kOk;
}

// --- transfer --------------------------------------------------------------

struct TransferArgs {
    std::string small;
    std::string large;
    double epsilon = 0;
    std::int64_t iters = 0;
    double budget = 0.1;
    bool baseline = false;
    bool json = false;
};

bool looks_like_trace(const std::string& path) {
    if (ends_with(path, ".ppitrace")) return true;
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    return first.rfind("{\"schema\"", 0) == 0;
}

int cmd_transfer(const TransferArgs& a, std::ostream& out) {
    const RunConfig large_cfg = load_with_env(a.large);
    const SyntheticModel large = large_cfg.build_model();
    TrainingOptions training = large_cfg.training;

    TrainingMask mask;
    SelectionResult selection;
    std::optional<KnapsackInstance> inst;
    RunRecord large_run;
    if (looks_like_trace(a.small)) {
        const TraceFile file = read_trace(a.small);
        const InfluenceTrace trace = to_influence_trace(file);
        inst.emplace(transfer_instance(trace.groups(), cumulative_values(trace, training.convention), large));
        mask = greedy_mask(*inst, a.epsilon, &selection);
        training.iterations = a.iters;
        large_run = run_training(large, mask, training);
    } else {
        const RunConfig small_cfg = load_with_env(a.small);
        TransferOptions opts;
        opts.budget_fraction = a.budget;
        opts.epsilon = a.epsilon;
        opts.iterations = a.iters;
        opts.training = training;
        TransferResult res = run_transfer(small_cfg.build_model(), large, opts);
        mask = std::move(res.mask);
        selection = std::move(res.selection);
        inst.emplace(std::move(res.instance));
        large_run = std::move(res.large_run);
    }

    std::optional<double> baseline;
    if (a.baseline) {
        training.iterations = a.iters;
        baseline = run_training(large, TrainingMask::all(large), training).losses.back();
    }

    if (a.json) {
        ordered_json j;
        j["selected"] = selected_json(*inst, selection.mask);
        j["fraction"] = selection.fraction;
        j["total_value"] = selection.total_value;
        j["iterations"] = a.iters;
        j["initial_loss"] = large_run.losses.front();
        j["final_loss"] = large_run.losses.back();
        j["baseline_final_loss"] = baseline ? ordered_json(*baseline) : ordered_json(nullptr);
        out << j.dump(2) << '\n';
        return kOk;
    }
    out << "selected: " << join_selected(*inst, selection.mask) << '\n'
        << "fraction: " << format_real(selection.fraction) << '\n'
        << "total_value: " << format_real(selection.total_value) << '\n'
        << "iterations: " << a.iters << '\n'
        << "initial_loss: " << format_real(large_run.losses.front()) << '\n'
        << "final_loss: " << format_real(large_run.losses.back()) << '\n';
    if (baseline) out << "baseline_final_loss: " << format_real(*baseline) << '\n';
    return kOk;
}

// --- render ----------------------------------------------------------------

struct RenderArgs {
    std::string kind;
    std::string trace;
    std::string out;
    std::string svg;
    std::string reference;
    std::string convention = "exact";
    double alpha = kDefaultEmaAlpha;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
    const TraceFile file = read_trace(a.trace);
    const ValueConvention conv = parse_convention(a.convention);
    if (a.kind == "heatmap") {
        HeatmapOptions opts;
        opts.alpha = a.alpha;
        opts.reference_group = a.reference;
        opts.convention = conv;
        const Matrix m = export_heatmap(file, opts);
        write_file(a.out, ends_with(a.out, ".svg") ? heatmap_svg(m) : heatmap_tsv(m));
        if (!a.svg.empty()) write_file(a.svg, heatmap_svg(m));
    } else if (a.kind == "appi") {
        write_file(a.out, appi_tsv(export_appi(file, conv)));
    } else {
        throw ConfigError("unknown render kind '" + a.kind + "'");
    }
    out << "wrote " << a.out << '\n';
    return kOk;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Influence-guided parameter group selection on synthetic models", "peftsel"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Train a configured model and write its influence trace");
    simulate->add_option("--config", sim.config, "Run config (JSON)")->required();
    simulate->add_option("--out", sim.out, "Output .ppitrace path")->required();
    simulate->add_flag("--json", sim.json, "Print the summary as JSON");

    SelectArgs sel;
    auto* select = app.add_subcommand("select", "Select parameter groups from a trace under a budget");
    select->add_option("--trace", sel.trace, "Input .ppitrace")->required();
    select->add_option("--epsilon", sel.epsilon, "Trainable parameter fraction budget")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    select->add_option("--solver", sel.solver, "Knapsack solver")
        ->check(CLI::IsMember({"greedy", "dp", "exhaustive", "mitm"}));
    select->add_option("--convention", sel.convention, "Value convention")->check(CLI::IsMember({"exact", "doubled"}));
    select->add_option("--dp-divisor", sel.dp_divisor, "DP weight rescaling divisor")->check(CLI::PositiveNumber);
    select->add_flag("--json", sel.json, "Print the report as JSON");

    FrontierArgs fr;
    auto* frontier = app.add_subcommand("frontier", "Pareto frontier of value against trainable fraction");
    frontier->add_option("--trace", fr.trace, "Input .ppitrace")->required();
    frontier->add_option("--mode", fr.mode, "exact or greedy")->check(CLI::IsMember({"exact", "greedy"}));
    frontier->add_option("--convention", fr.convention, "Value convention")->check(CLI::IsMember({"exact", "doubled"}));
    frontier->add_flag("--json", fr.json, "Print the table as JSON");

    TransferArgs tr;
    auto* transfer = app.add_subcommand("transfer", "Select on a small model, train the large one");
    transfer->add_option("--small", tr.small, "Small model config, or a .ppitrace from it")->required();
    transfer->add_option("--large", tr.large, "Large model config")->required();
    transfer->add_option("--epsilon", tr.epsilon, "Trainable parameter fraction budget")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    transfer->add_option("--iters", tr.iters, "Iterations on the large model")->required()->check(CLI::NonNegativeNumber);
    transfer->add_option("--budget", tr.budget, "Fraction of iterations for the small run")
        ->check(CLI::Range(0.0, 1.0));
    transfer->add_flag("--baseline", tr.baseline, "Also train the large model with every group active");
    transfer->add_flag("--json", tr.json, "Print the report as JSON");

    RenderArgs rd;
    auto* render = app.add_subcommand("render", "Export heatmap or APPI tables from a trace");
    render->add_option("--kind", rd.kind, "heatmap or appi")->required()->check(CLI::IsMember({"heatmap", "appi"}));
    render->add_option("--trace", rd.trace, "Input .ppitrace")->required();
    render->add_option("--out", rd.out, "Output path (.svg renders the heatmap as SVG)")->required();
    render->add_option("--svg", rd.svg, "Also write the heatmap as SVG here");
    render->add_option("--reference", rd.reference, "Reference group for heatmap rows (default: first)");
    render->add_option("--alpha", rd.alpha, "EMA smoothing factor")->check(CLI::Range(0.0, 1.0));
    render->add_option("--convention", rd.convention, "Value convention")->check(CLI::IsMember({"exact", "doubled"}));

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, out);
        if (select->parsed()) return cmd_select(sel, out);
        if (frontier->parsed()) return cmd_frontier(fr, out);
        if (transfer->parsed()) return cmd_transfer(tr, out);
        if (render->parsed()) return cmd_render(rd, out);
    } catch (const GuardError& e) {
        err << "error: " << e.what() << '\n';
        return kGuard;
    } catch (const CompatibilityError& e) {
        err << "error: " << e.what() << '\n';
        return kCompatibility;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

}  // namespace peftsel::cli
