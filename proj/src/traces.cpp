// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include "peftsel/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "peftsel/error.hpp"

namespace peftsel {

using ordered_json = nlohmann::ordered_json;

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

bool writable_name(const std::string& name) {
    return !name.empty() && name.find_first_of(",\t\r\n") == std::string::npos;
}

std::size_t find_group(const std::vector<ParameterGroup>& groups, const std::string& name) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].name == name) return i;
    }
    return groups.size();
}

std::string header_line(const std::string& model_name, const std::vector<ParameterGroup>& groups) {
    ordered_json header;
    header["schema"] = kTraceSchemaVersion;
    header["model"] = model_name;
    header["groups"] = ordered_json::array();
    for (const auto& g : groups) header["groups"].push_back({{"name", g.name}, {"size", g.size}});
    return header.dump();
}

std::string row_line(const TraceRow& r) {
    std::string line = std::to_string(r.iteration);
    line += ',';
    line += r.group;
    for (double x : {r.b, r.a, r.r2}) {
        line += ',';
        line += format_real(x);
    }
    line += r.valid ? ",1" : ",0";
    return line;
}

double parse_real(std::string_view field, std::size_t line_no) {
    double v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw ConfigError("trace line " + std::to_string(line_no) + ": bad real '" + std::string(field) + "'");
    }
    return v;
}

}  // namespace

void TraceFile::validate() const {
    if (schema_version != kTraceSchemaVersion) {
        throw ConfigError("unsupported trace schema " + std::to_string(schema_version));
    }
    std::set<std::string> names;
    for (const auto& g : groups) {
        if (!writable_name(g.name)) throw ConfigError("group name '" + g.name + "' cannot be written to a trace");
        if (g.size < 1) throw ConfigError("group '" + g.name + "' has size 0");
        if (!names.insert(g.name).second) throw ConfigError("duplicate group '" + g.name + "' in trace header");
    }
    std::set<std::pair<std::int64_t, std::string>> seen;
    for (const auto& r : rows) {
        if (names.count(r.group) == 0) throw ConfigError("trace row references unknown group '" + r.group + "'");
        if (!seen.emplace(r.iteration, r.group).second) {
            throw ConfigError("duplicate trace row for iteration " + std::to_string(r.iteration) + ", group '" +
                              r.group + "'");
        }
    }
}

TraceFile to_trace_file(const InfluenceTrace& trace, std::string model_name) {
    TraceFile f;
    f.model_name = std::move(model_name);
    f.groups = trace.groups();
    for (std::size_t c = 0; c < trace.iteration_count(); ++c) {
        for (std::size_t g = 0; g < trace.group_count(); ++g) {
            if (const auto& rec = trace.at(g, c)) {
                f.rows.push_back({trace.iterations()[c], trace.groups()[g].name, rec->b, rec->a, rec->r2, rec->valid});
            }
        }
    }
    return f;
}

InfluenceTrace to_influence_trace(const TraceFile& file) {
    file.validate();
    InfluenceTrace trace(file.groups);
    std::set<std::int64_t> iterations;
    for (const auto& r : file.rows) iterations.insert(r.iteration);
    std::map<std::int64_t, std::size_t> column;
    for (std::int64_t it : iterations) column[it] = trace.add_iteration(it);
    for (const auto& r : file.rows) trace.record(trace.group_index(r.group), column[r.iteration], r.fit());
    return trace;
}

KnapsackInstance instance_from_trace(const TraceFile& file, ValueConvention convention) {
    const std::vector<double> values = cumulative_values(to_influence_trace(file), convention);
    std::vector<Item> items;
    for (std::size_t g = 0; g < file.groups.size(); ++g) {
        items.push_back({file.groups[g].name, values[g], file.groups[g].size});
    }
    return KnapsackInstance(std::move(items));
}

std::string serialize(const TraceFile& file) {
    file.validate();
    std::string out = header_line(file.model_name, file.groups);
    out += '\n';
    for (const auto& r : file.rows) {
        out += row_line(r);
        out += '\n';
    }
    return out;
}

TraceFile parse_trace(std::string_view text) {
    TraceFile f;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        if (!have_header) {
            ordered_json header;
            try {
                header = ordered_json::parse(line);
                f.schema_version = header.at("schema").get<int>();
                f.model_name = header.at("model").get<std::string>();
                for (const auto& g : header.at("groups")) {
                    f.groups.push_back({g.at("name").get<std::string>(), g.at("size").get<std::uint64_t>()});
                }
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("trace header: ") + e.what());
            }
            have_header = true;
            continue;
        }

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 6) {
            throw ConfigError("trace line " + std::to_string(line_no) + ": expected 6 fields, got " +
                              std::to_string(fields.size()));
        }
        TraceRow r;
        const auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), r.iteration);
        if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size()) {
            throw ConfigError("trace line " + std::to_string(line_no) + ": bad iteration");
        }
        r.group = std::string(fields[1]);
        r.b = parse_real(fields[2], line_no);
        r.a = parse_real(fields[3], line_no);
        r.r2 = parse_real(fields[4], line_no);
        if (fields[5] == "1" || fields[5] == "true") {
            r.valid = true;
        } else if (fields[5] == "0" || fields[5] == "false") {
            r.valid = false;
        } else {
            throw ConfigError("trace line " + std::to_string(line_no) + ": bad valid flag");
        }
        f.rows.push_back(std::move(r));
    }
    if (!have_header) throw ConfigError("trace is missing its header line");
    f.validate();
    return f;
}

void write_trace(const std::filesystem::path& path, const TraceFile& file) {
    const std::string text = serialize(file);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

TraceFile read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trace '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str());
}

TraceWriter::TraceWriter(const std::filesystem::path& path, std::string model_name, std::vector<ParameterGroup> groups)
    : out_(path, std::ios::binary), groups_(std::move(groups)) {
    if (!out_) throw ConfigError("cannot open '" + path.string() + "' for writing");
    TraceFile header{kTraceSchemaVersion, model_name, groups_, {}};
    header.validate();
    out_ << header_line(model_name, groups_) << '\n' << std::flush;
}

void TraceWriter::append(const TraceRow& row) {
    if (!out_.is_open()) throw ContractError("trace writer is closed");
    if (find_group(groups_, row.group) == groups_.size()) {
        throw ContractError("trace row references unknown group '" + row.group + "'");
    }
    out_ << row_line(row) << '\n' << std::flush;
}

void TraceWriter::close() {
    if (out_.is_open()) out_.close();
}

double quantile(std::span<const double> series, double p) {
    if (series.empty()) throw ContractError("quantile of an empty series");
    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<std::size_t> iqr_keep(std::span<const double> series) {
    if (series.empty()) throw ContractError("iqr_filter needs a nonempty series");
    const double q1 = quantile(series, 0.25);
    const double q3 = quantile(series, 0.75);
    const double iqr = q3 - q1;
    const double lo = q1 - 3.0 * iqr;
    const double hi = q3 + 3.0 * iqr;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i] >= lo && series[i] <= hi) keep.push_back(i);
    }
    return keep;
}

std::vector<double> iqr_filter(std::span<const double> series) {
    std::vector<double> out;
    for (std::size_t i : iqr_keep(series)) out.push_back(series[i]);
    return out;
}

std::vector<double> ema_smooth(std::span<const double> series, double alpha) {
    if (series.empty()) throw ContractError("ema_smooth needs a nonempty series");
    if (!(alpha > 0 && alpha <= 1)) throw ContractError("ema alpha must lie in (0, 1]");
    std::vector<double> out(series.size());
    out[0] = series[0];
    for (std::size_t i = 1; i < series.size(); ++i) out[i] = alpha * series[i] + (1.0 - alpha) * out[i - 1];
    return out;
}

ProcessedSeries process_series(const TraceFile& file, const std::string& group, double alpha,
                               ValueConvention convention) {
    const std::size_t gi = find_group(file.groups, group);
    if (gi == file.groups.size()) throw ContractError("trace has no group '" + group + "'");

    std::vector<std::pair<std::int64_t, double>> raw;
    for (const auto& r : file.rows) {
        if (r.group == group) raw.emplace_back(r.iteration, ppi(r.fit(), file.groups[gi], convention));
    }
    std::sort(raw.begin(), raw.end());

    ProcessedSeries out{group, {}, {}};
    if (raw.empty()) return out;
    std::vector<double> values;
    for (const auto& [it, v] : raw) values.push_back(v);
    std::vector<double> kept;
    for (std::size_t i : iqr_keep(values)) {
        out.iterations.push_back(raw[i].first);
        kept.push_back(values[i]);
    }
    out.values = ema_smooth(kept, alpha);
    return out;
}

Matrix normalize_rows(const Matrix& matrix, const std::string& reference_group, double floor,
                      std::vector<std::int64_t>* dropped) {
    const auto ref_it = std::find(matrix.rows.begin(), matrix.rows.end(), reference_group);
    if (ref_it == matrix.rows.end()) throw ContractError("reference group '" + reference_group + "' not in matrix");
    const auto& ref = matrix.values[static_cast<std::size_t>(ref_it - matrix.rows.begin())];

    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < matrix.columns.size(); ++c) {
        if (std::abs(ref[c]) >= floor) {
            keep.push_back(c);
        } else {
            warn("reference group '" + reference_group + "' is below the floor at iteration " +
                 std::to_string(matrix.columns[c]) + "; column dropped");
            if (dropped != nullptr) dropped->push_back(matrix.columns[c]);
        }
    }

    Matrix out;
    out.rows = matrix.rows;
    for (std::size_t c : keep) out.columns.push_back(matrix.columns[c]);
    for (const auto& row : matrix.values) {
        std::vector<double> r;
        r.reserve(keep.size());
        for (std::size_t c : keep) r.push_back(row[c] / ref[c]);
        out.values.push_back(std::move(r));
    }
    return out;
}

Matrix export_heatmap(const TraceFile& file, const HeatmapOptions& options) {
    file.validate();
    if (file.groups.empty() || file.rows.empty()) throw ConfigError("cannot render a heatmap from an empty trace");
    const std::string reference = options.reference_group.empty() ? file.groups.front().name : options.reference_group;

    std::vector<ProcessedSeries> series;
    for (const auto& g : file.groups) series.push_back(process_series(file, g.name, options.alpha, options.convention));

    std::vector<std::int64_t> columns = series.front().iterations;
    for (const auto& s : series) {
        std::vector<std::int64_t> both;
        std::set_intersection(columns.begin(), columns.end(), s.iterations.begin(), s.iterations.end(),
                              std::back_inserter(both));
        columns = std::move(both);
    }

    Matrix m;
    m.columns = columns;
    for (const auto& s : series) {
        m.rows.push_back(s.group);
        std::vector<double> row;
        std::size_t j = 0;
        for (std::int64_t it : columns) {
            while (s.iterations[j] != it) ++j;
            row.push_back(s.values[j]);
        }
        m.values.push_back(std::move(row));
    }

    Matrix out = normalize_rows(m, reference, options.floor);
    for (auto& row : out.values) {
        for (double& v : row) v = std::log10(v);
    }
    return out;
}

std::string heatmap_tsv(const Matrix& heatmap) {
    std::string out = "group";
    for (std::int64_t c : heatmap.columns) out += '\t' + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
        out += heatmap.rows[r];
        for (double v : heatmap.values[r]) out += '\t' + format_real(v);
        out += '\n';
    }
    return out;
}

std::vector<AppiRow> export_appi(const TraceFile& file, ValueConvention convention) {
    file.validate();
    std::map<std::int64_t, std::map<std::string, const TraceRow*>> by_iteration;
    for (const auto& r : file.rows) by_iteration[r.iteration][r.group] = &r;

    std::vector<double> appi(file.groups.size(), 0.0), value(file.groups.size(), 0.0);
    std::vector<AppiRow> out;
    for (const auto& [iteration, rows] : by_iteration) {
        for (std::size_t g = 0; g < file.groups.size(); ++g) {
            const auto it = rows.find(file.groups[g].name);
            if (it != rows.end()) {
                const QuadraticFit fit = it->second->fit();
                appi[g] += ppi(fit, file.groups[g], convention);
                value[g] += reduction_value(fit, convention);
            }
            out.push_back({iteration, file.groups[g].name, appi[g], value[g]});
        }
    }
    return out;
}

std::string appi_tsv(std::span<const AppiRow> rows) {
    std::string out;
    for (const auto& r : rows) {
        out += std::to_string(r.iteration) + '\t' + r.group + '\t' + format_real(r.appi) + '\t' +
               format_real(r.cum_value) + '\n';
    }
    return out;
}

}  // namespace peftsel
