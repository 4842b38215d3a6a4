#pragma once

// CSV with round-trip precision and a minimal single-series SVG line plot.

#include "rfcdelay/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace rfcdelay {

/// 17 significant digits; "nan", "inf" and "-inf" for non-finite values.
[[nodiscard]] inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    /// Cells are numbers or preformatted text.
    struct Cell {
        Cell(double v) : text(format_double(v)) {}                    // NOLINT
        Cell(int v) : text(std::to_string(v)) {}                      // NOLINT
        Cell(long v) : text(std::to_string(v)) {}                     // NOLINT
        Cell(unsigned long v) : text(std::to_string(v)) {}            // NOLINT
        Cell(unsigned long long v) : text(std::to_string(v)) {}       // NOLINT
        Cell(bool v) : text(v ? "true" : "false") {}                  // NOLINT
        Cell(std::string s) : text(std::move(s)) {}                   // NOLINT
        Cell(const char* s) : text(s) {}                              // NOLINT
        std::string text;
    };

    void add(std::vector<Cell> row) {
        if (row.size() != header_.size()) throw InvalidSystem("csv row has the wrong number of cells");
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += row[i].text;
        }
        rows_.push_back(std::move(line));
    }

    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }

    [[nodiscard]] std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) out += ',';
            out += header_[i];
        }
        out += '\n';
        for (const auto& r : rows_) {
            out += r;
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path) const { write_text(path, str()); }

    static void write_text(const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw InvalidSystem("cannot open " + path + " for writing");
        f << text;
        if (!f) throw InvalidSystem("failed writing " + path);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

struct SvgPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 400;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace detail

/// Polyline through (x, y); points that are non-finite (or nonpositive on a log axis) are dropped.
[[nodiscard]] inline std::string render_svg(const SvgPlot& plot, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidSystem("svg series lengths differ");
    auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        if ((plot.log_x && x[i] <= 0.0) || (plot.log_y && y[i] <= 0.0)) continue;
        pts.emplace_back(tx(x[i]), ty(y[i]));
    }
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (!pts.empty()) {
        x0 = x1 = pts[0].first;
        y0 = y1 = pts[0].second;
        for (const auto& [a, b] : pts) {
            x0 = std::min(x0, a);
            x1 = std::max(x1, a);
            y0 = std::min(y0, b);
            y1 = std::max(y1, b);
        }
    }
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double w = plot.width - left - right, h = plot.height - top - bottom;
    auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * w; };
    auto py = [&](double v) { return top + (1.0 - (v - y0) / (y1 - y0)) * h; };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << plot.width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << detail::xml_escape(plot.title)
      << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    auto tick = [&](double v, bool log) { return log ? "1e" + detail::short_number(v) : detail::short_number(v); };
    s << "<text x=\"" << left << "\" y=\"" << top + h + 18 << "\" text-anchor=\"start\">" << tick(x0, plot.log_x)
      << "</text>\n";
    s << "<text x=\"" << left + w << "\" y=\"" << top + h + 18 << "\" text-anchor=\"end\">" << tick(x1, plot.log_x)
      << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + h << "\" text-anchor=\"end\">" << tick(y0, plot.log_y)
      << "</text>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << tick(y1, plot.log_y)
      << "</text>\n";
    s << "<text x=\"" << left + w / 2 << "\" y=\"" << plot.height - 10 << "\" text-anchor=\"middle\">"
      << detail::xml_escape(plot.x_label) << "</text>\n";
    s << "<text x=\"16\" y=\"" << top + h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + h / 2
      << ")\">" << detail::xml_escape(plot.y_label) << "</text>\n";
    s << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) s << ' ';
        s << detail::short_number(px(pts[i].first)) << ',' << detail::short_number(py(pts[i].second));
    }
    s << "\"/>\n</svg>\n";
    return s.str();
}

inline void write_svg(const std::string& path, const SvgPlot& plot, const std::vector<double>& x,
                      const std::vector<double>& y) {
    CsvTable::write_text(path, render_svg(plot, x, y));
}

}  // namespace rfcdelay
