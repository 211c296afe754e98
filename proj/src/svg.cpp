// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "peftsel/traces.hpp"

namespace peftsel {

namespace {

// Dark (weak influence) to light (strong influence).
constexpr std::array<const char*, 9> kPalette = {
    "#440154", "#472d7b", "#3b528b", "#2c728e", "#21918c", "#28ae80", "#5ec962", "#addc30", "#fde725",
};
constexpr const char* kMissing = "#bdbdbd";

constexpr int kCellW = 24;
constexpr int kCellH = 18;
constexpr int kLeft = 120;
constexpr int kTop = 28;

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

const char* color_for(double v, double lo, double hi) {
    if (std::isnan(v)) return kMissing;
    if (v == -std::numeric_limits<double>::infinity()) return kPalette.front();
    if (v == std::numeric_limits<double>::infinity()) return kPalette.back();
    if (!(hi > lo)) return kPalette[kPalette.size() / 2];
    const double t = (v - lo) / (hi - lo);
    const auto bin = static_cast<std::size_t>(std::clamp(std::floor(t * 9.0), 0.0, 8.0));
    return kPalette[bin];
}

}  // namespace

std::string heatmap_svg(const Matrix& heatmap) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& row : heatmap.values) {
        for (double v : row) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }

    const std::size_t ncols = heatmap.columns.size();
    const std::size_t label_every = ncols <= 40 ? 1 : (ncols + 19) / 20;
    const int width = kLeft + static_cast<int>(ncols) * kCellW + 8;
    const int height = kTop + static_cast<int>(heatmap.rows.size()) * kCellH + 8;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" font-family=\"monospace\" font-size=\"10\">\n";
    for (std::size_t c = 0; c < ncols; c += label_every) {
        const int x = kLeft + static_cast<int>(c) * kCellW + kCellW / 2;
        out += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(kTop - 8) +
               "\" text-anchor=\"middle\">" + std::to_string(heatmap.columns[c]) + "</text>\n";
    }
    for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
        const int y = kTop + static_cast<int>(r) * kCellH;
        out += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + std::to_string(y + kCellH - 5) +
               "\" text-anchor=\"end\">" + escape(heatmap.rows[r]) + "</text>\n";
        for (std::size_t c = 0; c < ncols; ++c) {
            const int x = kLeft + static_cast<int>(c) * kCellW;
            out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                   std::to_string(kCellW) + "\" height=\"" + std::to_string(kCellH) + "\" fill=\"" +
                   color_for(heatmap.values[r][c], lo, hi) + "\"><title>" + escape(heatmap.rows[r]) + " @ " +
                   std::to_string(heatmap.columns[c]) + ": " + format_real(heatmap.values[r][c]) +
                   "</title></rect>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace peftsel
