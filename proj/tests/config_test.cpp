// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "peftsel/config.hpp"
#include "peftsel/error.hpp"

using namespace peftsel;

TEST_CASE("minimal config") {
    const RunConfig c = parse_config(R"({"model":{"preset":"planted8"},"training":{"iterations":12,"seed":5}})");
    CHECK(c.training.iterations == 12);
    CHECK(c.seed == 5);
    CHECK(c.build_model().group_count() == 8);
}

TEST_CASE("explicit groups") {
    const RunConfig c = parse_config(R"({
      "model": {"name": "toy", "noise_sigma": 0.0,
                "groups": [{"name": "a", "size": 10, "dim": 2, "curvature": 2.0, "offset_norm": 3.0},
                           {"name": "b", "size": 5, "target": [1.0], "curvature": 1.0}]},
      "training": {"iterations": 3, "mode": "sequential", "mask": ["b"]},
      "selection": {"epsilon": 0.4, "solver": "dp"},
      "value_convention": "doubled"})");
    const SyntheticModel m = c.build_model();
    CHECK(loss(m) == doctest::Approx(0.5 * 2 * 9 + 0.5));
    CHECK(c.training.mode == UpdateMode::sequential);
    CHECK(c.training.convention == ValueConvention::doubled);
    CHECK(c.solver == Solver::dp);
    CHECK(c.epsilon == 0.4);
    CHECK(c.training_mask(m).active == std::set<std::string>{"b"});
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"preset":"nope"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"preset":"planted8"},"bogus":1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"preset":"planted8"},"training":{"mask":["zz"]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"preset":"planted8"},"training":{"iterations":-1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"groups":[{"name":"a","size":0}]}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model":{"preset":"planted8"},"selection":{"epsilon":2}})"), ConfigError);
    CHECK_THROWS_AS(parse_convention("half"), ConfigError);
    CHECK_THROWS_AS(parse_mode("random"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/run.json"), ConfigError);
}

TEST_CASE("solver guard is checked at load") {
    std::string groups;
    for (int i = 0; i < 30; ++i) {
        if (i) groups += ',';
        groups += R"({"name":"g)" + std::to_string(i) + R"(","size":1,"offset_norm":1})";
    }
    const std::string text = R"({"model":{"groups":[)" + groups + R"(]},"selection":{"solver":"exhaustive"}})";
    CHECK_THROWS_AS(parse_config(text), GuardError);
    CHECK_THROWS_AS(check_solver_guard(Solver::mitm, 41), GuardError);
    CHECK_NOTHROW(check_solver_guard(Solver::greedy, 1000));
}

TEST_CASE("planted8 design") {
    const ModelConfig p = *preset("planted8");
    const SyntheticModel m = build_model(p, 1);
    std::vector<double> losses;
    std::uint64_t total_size = 0;
    for (std::size_t k = 0; k < m.group_count(); ++k) {
        losses.push_back(m.group_loss(k));
        total_size += m.groups()[k].group.size;
    }
    const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
    const std::size_t g3 = m.group_index("g3"), g7 = m.group_index("g7");
    CHECK((losses[g3] + losses[g7]) / total >= 0.9);
    // The two planted groups are the two smallest.
    std::vector<std::uint64_t> sizes;
    for (const auto& g : m.groups()) sizes.push_back(g.group.size);
    std::sort(sizes.begin(), sizes.end());
    CHECK(m.groups()[g3].group.size <= sizes[1]);
    CHECK(m.groups()[g7].group.size <= sizes[1]);
    // The designed budget affords exactly the pair.
    const std::uint64_t cap = static_cast<std::uint64_t>(kPlanted8Epsilon * double(total_size));
    CHECK(m.groups()[g3].group.size + m.groups()[g7].group.size <= cap);
    CHECK(m.groups()[g3].group.size + m.groups()[g7].group.size + sizes[2] > cap);

    const ModelConfig large = *preset("planted8-large");
    const SyntheticModel ml = build_model(large, 1);
    for (std::size_t k = 0; k < m.group_count(); ++k) {
        CHECK(ml.groups()[k].group.name == m.groups()[k].group.name);
        CHECK(ml.groups()[k].curvature == m.groups()[k].curvature);
        CHECK(ml.groups()[k].dim() == 10 * m.groups()[k].dim());
    }
}

TEST_CASE("offset_norm_for_loss") {
    CHECK(offset_norm_for_loss(2.0, 9.0) == doctest::Approx(3.0));
}
