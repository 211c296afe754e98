// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "peftsel/config.hpp"
#include "peftsel/error.hpp"
#include "peftsel/simulator.hpp"
#include "test_util.hpp"

using namespace peftsel;

namespace {

GroupSpec spec(std::string name, std::uint64_t size, double c, std::vector<double> offset) {
    std::vector<double> target(offset.size(), 0.0);
    return GroupSpec{{std::move(name), size}, c, target, std::move(offset)};
}

SyntheticModel eight_groups(double sigma = 0.0) {
    std::vector<GroupSpec> groups;
    for (int k = 0; k < 8; ++k) {
        const double c = 0.5 + 0.4 * k;
        groups.push_back(spec("g" + std::to_string(k), 10 + 5 * static_cast<std::uint64_t>(k), c,
                              {1.0 + 0.1 * k, -0.5, 0.25 * k}));
    }
    return SyntheticModel("eight", std::move(groups), sigma, 3);
}

}  // namespace

TEST_CASE("loss examples") {
    SyntheticModel at_min("m", {spec("g", 1, 2, {0.0})});
    CHECK(loss(at_min) == 0.0);
    SyntheticModel one("m", {spec("g", 1, 2, {3.0})});
    CHECK(loss(one) == 9.0);
    SyntheticModel two("m", {spec("a", 1, 1, {2.0, 0.0}), spec("b", 1, 3, {1.0})});
    CHECK(loss(two) == 3.5);
}

TEST_CASE("gradient examples") {
    SyntheticModel m("m", {spec("g", 1, 2, {1.0, 0.0})});
    NoiseEngine e(1);
    const Gradient g = gradient(m, e);
    CHECK(g[0] == std::vector<double>{2.0, 0.0});

    SyntheticModel z("m", {spec("g", 1, 2, {0.0, 0.0})});
    CHECK(gradient(z, e)[0] == std::vector<double>{0.0, 0.0});
}

TEST_CASE("noisy gradient is reproducible from the seed") {
    SyntheticModel m("m", {spec("a", 1, 2, {1.0, 0.0}), spec("b", 1, 1, {0.5})}, 0.1);
    NoiseEngine e1(42);
    const Gradient g = gradient(m, e1);

    // Oracle: same generator, Box-Muller written out, noise in group-then-coordinate order.
    NoiseEngine e2(42);
    auto normal = [&e2] {
        const double u1 = (static_cast<double>(e2() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(e2() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    };
    const double n0 = normal(), n1 = normal(), n2 = normal();
    CHECK(g[0][0] == 2.0 + 0.1 * n0);
    CHECK(g[0][1] == 0.0 + 0.1 * n1);
    CHECK(g[1][0] == 0.5 + 0.1 * n2);
}

TEST_CASE("probe_losses") {
    SyntheticModel m("m", {spec("g", 1, 1, {1.0})});
    NoiseEngine e(0);
    const Gradient g = gradient(m, e);
    const ProbeSet p = probe_losses(m, g, "g", 0.1);
    const std::vector<double> want{0.22, 0.105, -0.095, -0.18};
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.loss_deltas[i] == doctest::Approx(want[i]).epsilon(1e-14));
    const QuadraticFit fit = fit_quadratic(p);
    CHECK(fit.b == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loss(m) == 0.5);

    SyntheticModel z("m", {spec("g", 1, 1, {0.0})});
    const ProbeSet zp = probe_losses(z, gradient(z, e), "g", 0.1);
    for (double d : zp.loss_deltas) CHECK(d >= 0.0);
    CHECK_FALSE(fit_quadratic(zp).valid);
}

TEST_CASE("one lazy step is a Newton step") {
    SyntheticModel m("m", {spec("g", 1, 2.5, {1.0, -2.0, 0.5})});
    TrainingOptions opt;
    opt.iterations = 1;
    opt.lazy_period = 1;
    const RunRecord r = run_training(m, TrainingMask::all(m), opt);
    CHECK(r.lr_history[0][0] == doctest::Approx(1 / 2.5).epsilon(1e-9));
    CHECK(r.losses[1] <= 1e-12 * r.losses[0]);
}

TEST_CASE("empty mask keeps the loss constant") {
    const SyntheticModel m = eight_groups(0.05);
    TrainingOptions opt;
    opt.iterations = 20;
    const RunRecord r = run_training(m, TrainingMask{}, opt);
    for (double l : r.losses) CHECK(l == r.losses[0]);
    CHECK(r.trace.iteration_count() == 0);
}

TEST_CASE("sequential run: summed values equal the loss drop") {
    const SyntheticModel m = eight_groups();
    TrainingOptions opt;
    opt.iterations = 200;
    opt.mode = UpdateMode::sequential;
    const RunRecord r = run_training(m, TrainingMask::all(m), opt);
    double sum = 0;
    for (double v : r.cumulative_values) sum += v;
    const double drop = r.losses.front() - r.losses.back();
    CHECK(rel_err(sum, drop) <= 1e-6);
    // Every group is probed, not only the one moving at t = 0.
    for (std::size_t k = 0; k < 8; ++k) CHECK(r.cumulative_values[k] > 0);
}

TEST_CASE("sequential mode re-probes each group after the lazy period") {
    const SyntheticModel m = eight_groups();
    TrainingOptions opt;
    opt.iterations = 64;
    opt.mode = UpdateMode::sequential;
    opt.lazy_period = 16;
    const RunRecord r = run_training(m, TrainingMask::all(m), opt);
    // Group k moves at k, k + 8, ...; probes at k, k + 16, k + 32, k + 48.
    const std::vector<std::int64_t> want{0, 1, 2, 3, 4, 5, 6, 7, 16, 17, 18, 19, 20, 21, 22, 23,
                                         32, 33, 34, 35, 36, 37, 38, 39, 48, 49, 50, 51, 52, 53, 54, 55};
    CHECK(r.trace.iterations() == want);
}

TEST_CASE("simultaneous lazy schedule defaults to 4K") {
    const SyntheticModel m = eight_groups(0.01);
    TrainingOptions opt;
    opt.iterations = 100;
    const RunRecord r = run_training(m, TrainingMask::all(m), opt);
    CHECK(r.trace.iterations() == std::vector<std::int64_t>{0, 32, 64, 96});
}

TEST_CASE("run contract errors") {
    const SyntheticModel m = eight_groups();
    TrainingOptions opt;
    opt.iterations = -1;
    CHECK_THROWS_AS(run_training(m, TrainingMask::all(m), opt), ContractError);
    opt.iterations = 1;
    CHECK_THROWS_AS(run_training(m, TrainingMask{{"nope"}}, opt), ContractError);
}

TEST_CASE("transfer examples") {
    const SyntheticModel m = eight_groups();
    TransferOptions opt;
    opt.budget_fraction = 1.0;
    opt.epsilon = 1.0;
    opt.iterations = 40;
    const TransferResult r = run_transfer(m, m, opt);
    CHECK(r.mask == TrainingMask::all(m));
    TrainingOptions fmt = opt.training;
    fmt.iterations = 40;
    CHECK(r.large_run.losses == run_training(m, TrainingMask::all(m), fmt).losses);

    opt.epsilon = 0.001;
    const TransferResult none = run_transfer(m, m, opt);
    CHECK(none.mask.active.empty());
    CHECK(none.large_run.losses.back() == none.large_run.losses.front());
}

TEST_CASE("planted8 small to large selects the planted pair") {
    const auto small_cfg = *preset("planted8");
    const auto large_cfg = *preset("planted8-large");
    TransferOptions opt;
    opt.epsilon = kPlanted8Epsilon;
    opt.iterations = 100;
    const TransferResult r = run_transfer(build_model(small_cfg, 1), build_model(large_cfg, 1), opt);
    CHECK(r.mask.active == std::set<std::string>{"g3", "g7"});
}

TEST_CASE("transfer needs matching group names") {
    const SyntheticModel a("a", {spec("x", 1, 1, {1.0})});
    const SyntheticModel b("b", {spec("y", 1, 1, {1.0})});
    CHECK_THROWS_AS(run_transfer(a, b, {}), CompatibilityError);
}

TEST_CASE("quartic perturbation: one-step value predicts the loss drop to 1e-2") {
    SyntheticModel m("q", {spec("a", 4, 1.5, {0.8, -0.6}), spec("b", 2, 0.7, {1.1})}, 0.0, 0, 1e-3);
    TrainingOptions opt;
    opt.iterations = 1;
    opt.lazy_period = 1;
    const RunRecord r = run_training(m, TrainingMask::all(m), opt);
    for (std::size_t k = 0; k < m.group_count(); ++k) {
        const double drop = m.group_loss(k) - m.group_loss(k, r.final_parameters[k]);
        CHECK(rel_err(r.cumulative_values[k], drop) <= 1e-2);
    }
}
