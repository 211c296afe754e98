// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peftsel/influence.hpp"
#include "peftsel/knapsack.hpp"

namespace peftsel {

inline constexpr int kTraceSchemaVersion = 1;

struct TraceRow {
    std::int64_t iteration = 0;
    std::string group;
    double b = 0.0;
    double a = 0.0;
    double r2 = 0.0;
    bool valid = false;

    QuadraticFit fit() const { return {b, a, r2, valid}; }
    bool operator==(const TraceRow&) const = default;
};

/// In-memory form of a .ppitrace file.
///
/// Line 1 is a JSON header {"schema":1,"model":...,"groups":[{"name":...,"size":...}]};
/// every further line is `iteration,group,b,a,r2,valid` with reals in shortest
/// round-trip decimal form and valid as 1 or 0.
struct TraceFile {
    int schema_version = kTraceSchemaVersion;
    std::string model_name;
    std::vector<ParameterGroup> groups;
    std::vector<TraceRow> rows;

    /// Throws ConfigError on unknown groups, duplicate (iteration, group)
    /// pairs, or names that cannot be written unambiguously.
    void validate() const;
    bool operator==(const TraceFile&) const = default;
};

TraceFile to_trace_file(const InfluenceTrace& trace, std::string model_name);
InfluenceTrace to_influence_trace(const TraceFile& file);

std::string serialize(const TraceFile& file);
TraceFile parse_trace(std::string_view text);

void write_trace(const std::filesystem::path& path, const TraceFile& file);
TraceFile read_trace(const std::filesystem::path& path);

/// Append-only writer for streaming rows during a run.
class TraceWriter {
public:
    TraceWriter(const std::filesystem::path& path, std::string model_name, std::vector<ParameterGroup> groups);

    void append(const TraceRow& row);
    void close();

private:
    std::ofstream out_;
    std::vector<ParameterGroup> groups_;
};

/// Knapsack items from a trace: each group's summed reduction value against
/// its size, in header order.
KnapsackInstance instance_from_trace(const TraceFile& file,
                                     ValueConvention convention = ValueConvention::exact_minimum);

/// Shortest decimal string that parses back to the same double.
std::string format_real(double value);

/// Keeps v with Q1 - 3 iqr <= v <= Q3 + 3 iqr, quartiles by linear
/// interpolation on the sorted series. Order is preserved.
std::vector<double> iqr_filter(std::span<const double> series);
/// Indices of the values iqr_filter keeps.
std::vector<std::size_t> iqr_keep(std::span<const double> series);

/// p-th quantile (p in [0, 1]) with linear interpolation between closest ranks.
double quantile(std::span<const double> series, double p);

inline constexpr double kDefaultEmaAlpha = 0.3;

/// s_0 = v_0, s_i = alpha v_i + (1 - alpha) s_{i-1}.
std::vector<double> ema_smooth(std::span<const double> series, double alpha = kDefaultEmaAlpha);

struct ProcessedSeries {
    std::string group;
    std::vector<std::int64_t> iterations;
    std::vector<double> values;
};

/// Raw PPI series of one group (iterations where it has a row), then IQR
/// filtering and EMA smoothing.
ProcessedSeries process_series(const TraceFile& file, const std::string& group, double alpha = kDefaultEmaAlpha,
                               ValueConvention convention = ValueConvention::exact_minimum);

/// Dense group x iteration table.
struct Matrix {
    std::vector<std::string> rows;
    std::vector<std::int64_t> columns;
    std::vector<std::vector<double>> values;  // values[row][column]
};

inline constexpr double kDefaultReferenceFloor = 1e-30;

/// Divides every row by the reference row. Columns where the reference is
/// below `floor` in magnitude are dropped with a warning and reported through
/// `dropped` when given.
Matrix normalize_rows(const Matrix& matrix, const std::string& reference_group, double floor = kDefaultReferenceFloor,
                      std::vector<std::int64_t>* dropped = nullptr);

struct HeatmapOptions {
    double alpha = kDefaultEmaAlpha;
    std::string reference_group;  // empty: the first group in the header
    double floor = kDefaultReferenceFloor;
    ValueConvention convention = ValueConvention::exact_minimum;
};

/// PPI -> iqr_filter -> ema_smooth -> matrix -> normalize_rows -> log10.
/// Columns are the iterations that survive in every group.
/// Throws ConfigError on a trace without groups or rows.
Matrix export_heatmap(const TraceFile& file, const HeatmapOptions& options = {});

/// Header row of iterations, first column of group names, tab separated.
std::string heatmap_tsv(const Matrix& heatmap);
/// Standalone SVG with a 9-step palette over the finite value range.
std::string heatmap_svg(const Matrix& heatmap);

struct AppiRow {
    std::int64_t iteration = 0;
    std::string group;
    double appi = 0.0;       // running sum of PPI
    double cum_value = 0.0;  // running sum of reduction values
};

/// Running sums per group at every iteration in the trace (groups carry their
/// last sum through iterations where they have no row).
std::vector<AppiRow> export_appi(const TraceFile& file, ValueConvention convention = ValueConvention::exact_minimum);
/// One `iteration\tgroup\tappi\tcum_value` line per row, no header.
std::string appi_tsv(std::span<const AppiRow> rows);

}  // namespace peftsel
