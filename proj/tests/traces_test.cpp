// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "peftsel/error.hpp"
#include "peftsel/traces.hpp"
#include "test_util.hpp"

using namespace peftsel;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A fit whose exact-minimum value is v: b = v, a = v / 2.
TraceRow row(std::int64_t it, std::string g, double v) { return {it, std::move(g), v, v / 2, 1, true}; }

}  // namespace

TEST_CASE("quantile and iqr_filter") {
    const std::vector<double> s{1, 2, 3, 4, 1000};
    CHECK(quantile(s, 0.25) == 2.0);
    CHECK(quantile(s, 0.75) == 4.0);
    CHECK(iqr_filter(s) == std::vector<double>{1, 2, 3, 4});
    const std::vector<double> c{5, 5, 5};
    CHECK(iqr_filter(c) == c);
    const std::vector<double> in{3, 1, 2};
    CHECK(iqr_filter(in) == in);
    CHECK(iqr_keep(s) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("ema_smooth") {
    const std::vector<double> s{0.3, -1, 7, 2};
    CHECK(ema_smooth(s, 1.0) == s);
    const std::vector<double> c{4, 4, 4};
    CHECK(ema_smooth(c) == c);
    CHECK(ema_smooth(std::vector<double>{0, 1}, 0.5) == std::vector<double>{0, 0.5});
    CHECK_THROWS_AS(ema_smooth(s, 0.0), ContractError);
    CHECK_THROWS_AS(ema_smooth(s, 1.5), ContractError);
}

TEST_CASE("normalize_rows") {
    Matrix m{{"ref", "same", "twice"}, {0, 1, 2}, {{1, 2, 4}, {1, 2, 4}, {2, 4, 8}}};
    const Matrix n = normalize_rows(m, "ref");
    CHECK(n.values[0] == std::vector<double>{1, 1, 1});
    CHECK(n.values[1] == std::vector<double>{1, 1, 1});
    CHECK(n.values[2] == std::vector<double>{2, 2, 2});
}

TEST_CASE("normalize_rows drops columns with a vanishing reference") {
    std::vector<std::string> warnings;
    set_warning_sink([&warnings](std::string_view w) { warnings.emplace_back(w); });
    Matrix m{{"ref", "x"}, {0, 1, 2}, {{1, 0, 4}, {3, 5, 8}}};
    std::vector<std::int64_t> dropped;
    const Matrix n = normalize_rows(m, "ref", kDefaultReferenceFloor, &dropped);
    set_warning_sink(nullptr);
    CHECK(n.columns == std::vector<std::int64_t>{0, 2});
    CHECK(n.values[1] == std::vector<double>{3, 2});
    CHECK(dropped == std::vector<std::int64_t>{1});
    CHECK(warnings.size() == 1);
}

TEST_CASE("format_real round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, i % 30 - 15);
        CHECK(std::stod(format_real(x)) == x);
    }
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(2.0) == "2");
}

TEST_CASE("trace serialization round-trips") {
    TraceFile f;
    f.model_name = "m";
    f.groups = {{"a", 3}, {"b", 5}};
    f.rows = {row(0, "a", 1.5), row(0, "b", 0.1), {8, "a", -2.5e-17, 3.25, 0.42, false}};
    const std::string text = serialize(f);
    CHECK(parse_trace(text) == f);
    CHECK(serialize(parse_trace(text)) == text);

    const auto path = std::filesystem::temp_directory_path() / "peftsel_roundtrip.ppitrace";
    write_trace(path, f);
    CHECK(read_trace(path) == f);
    std::filesystem::remove(path);
}

TEST_CASE("trace parse errors") {
    CHECK_THROWS_AS(parse_trace(""), ConfigError);
    CHECK_THROWS_AS(parse_trace("not json\n"), ConfigError);
    const std::string header = R"({"schema":1,"model":"m","groups":[{"name":"a","size":3}]})";
    CHECK_THROWS_AS(parse_trace(header + "\n0,zz,1,1,1,1\n"), ConfigError);
    CHECK_THROWS_AS(parse_trace(header + "\n0,a,1,1,1\n"), ConfigError);
    CHECK_THROWS_AS(parse_trace(header + "\n0,a,1,1,1,1\n0,a,1,1,1,1\n"), ConfigError);
    CHECK_THROWS_AS(parse_trace(header + "\n0,a,x,1,1,1\n"), ConfigError);
    CHECK_THROWS_AS(parse_trace(R"({"schema":2,"model":"m","groups":[]})"), ConfigError);
    CHECK_NOTHROW(parse_trace(header + "\n"));
}

TEST_CASE("trace writer streams rows") {
    const auto path = std::filesystem::temp_directory_path() / "peftsel_writer.ppitrace";
    {
        TraceWriter w(path, "m", {{"a", 3}});
        w.append(row(0, "a", 2));
        w.append(row(4, "a", 1));
        w.close();
    }
    const TraceFile f = read_trace(path);
    CHECK(f.rows.size() == 2);
    CHECK(f.rows[1].iteration == 4);
    std::filesystem::remove(path);
}

TEST_CASE("influence trace conversion") {
    InfluenceTrace t({{"a", 2}, {"b", 4}});
    t.add_iteration(0);
    t.record(0, {3, 2, 1, true});
    t.add_iteration(8);
    t.record(1, {2, 1, 1, true});
    const TraceFile f = to_trace_file(t, "m");
    CHECK(f.rows.size() == 2);
    const InfluenceTrace back = to_influence_trace(f);
    CHECK(back.iterations() == t.iterations());
    CHECK(back.records() == t.records());
}

TEST_CASE("instance_from_trace uses summed values and sizes") {
    const KnapsackInstance inst = instance_from_trace(read_trace(fixture("knapsack3.ppitrace")));
    REQUIRE(inst.size() == 3);
    CHECK(inst.items()[0].value == 10.0);
    CHECK(inst.items()[1].value == 7.0);
    CHECK(inst.items()[2].value == 5.0);
    CHECK(inst.items()[2].weight == 2);
    const KnapsackInstance doubled = instance_from_trace(read_trace(fixture("knapsack3.ppitrace")), ValueConvention::doubled);
    CHECK(doubled.items()[0].value == 20.0);
}

TEST_CASE("heatmap examples") {
    TraceFile f;
    f.groups = {{"ref", 1}, {"big", 1}};
    for (int i = 0; i < 6; ++i) {
        f.rows.push_back(row(4 * i, "ref", 0.5));
        f.rows.push_back(row(4 * i, "big", 50));
    }
    const Matrix h = export_heatmap(f);
    CHECK(h.rows == std::vector<std::string>{"ref", "big"});
    for (double v : h.values[0]) CHECK(v == 0.0);
    for (double v : h.values[1]) CHECK(v == doctest::Approx(2.0).epsilon(1e-15));

    TraceFile same = f;
    for (auto& r : same.rows) r = row(r.iteration, r.group, 3);
    for (const auto& rv : export_heatmap(same).values)
        for (double v : rv) CHECK(v == 0.0);

    TraceFile single;
    single.groups = {{"only", 2}};
    single.rows = {row(0, "only", 1), row(4, "only", 3)};
    const Matrix s = export_heatmap(single);
    CHECK(s.values.size() == 1);
    CHECK(s.values[0] == std::vector<double>{0, 0});
    CHECK(heatmap_tsv(s) == "group\t0\t4\nonly\t0\t0\n");
}

TEST_CASE("heatmap columns are iterations kept in every group") {
    TraceFile f;
    f.groups = {{"a", 1}, {"b", 1}};
    for (int i = 0; i < 5; ++i) {
        f.rows.push_back(row(i, "a", 1 + 0.01 * i));
        f.rows.push_back(row(i, "b", i == 2 ? 1000.0 : 2.0));
    }
    CHECK(export_heatmap(f).columns == std::vector<std::int64_t>{0, 1, 3, 4});
}

TEST_CASE("appi export") {
    TraceFile one;
    one.groups = {{"g", 2}};
    one.rows = {row(0, "g", 3)};
    auto rows = export_appi(one);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].appi == 1.5);

    TraceFile bad;
    bad.groups = {{"g", 2}};
    bad.rows = {{0, "g", 1, 1, 0.2, false}, {4, "g", 1, 1, 0.2, false}};
    for (const auto& r : export_appi(bad)) CHECK(r.appi == 0.0);

    TraceFile two;
    two.groups = {{"g", 4}};
    two.rows = {row(0, "g", 2), row(8, "g", 6)};
    rows = export_appi(two);
    REQUIRE(rows.size() == 2);
    const double p1 = 2.0 / 4, p2 = 6.0 / 4;
    CHECK(rows[0].appi == p1);
    CHECK(rows[1].appi == p1 + p2);
    CHECK(appi_tsv(rows) == "0\tg\t0.5\t2\n8\tg\t2\t8\n");
}

TEST_CASE("golden render fixture") {
    const TraceFile f = read_trace(fixture("render.ppitrace"));
    const Matrix h = export_heatmap(f);
    CHECK(heatmap_tsv(h) == slurp(fixture("render_golden.tsv")));
    CHECK(heatmap_svg(h) == slurp(fixture("render_golden.svg")));
    CHECK(appi_tsv(export_appi(f)) == slurp(fixture("render_golden_appi.tsv")));
}
