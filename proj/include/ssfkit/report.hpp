#pragma once
// CSV and SVG emission.  Decimals are written with 17 significant digits,
// so a CSV re-read with strtod reproduces every double bit for bit.

#include "ssfkit/ssf.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ssfkit::cli {

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError("no column named '" + name + "'");
    }
};

inline std::string format_number(double v) {
    if (!std::isfinite(v)) throw FormatError("non-finite value in report");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_number(long v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_flag(bool b) { return b ? "1" : "0"; }

inline double parse_number(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw FormatError("non-numeric field '" + s + "'");
    return v;
}

inline std::vector<double> numeric_column(const CsvTable& t, const std::string& name) {
    const std::size_t c = t.column_index(name);
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(parse_number(row.at(c)));
    return out;
}

inline std::string to_csv(const CsvTable& t) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        if (cells.size() != t.header.size()) throw FormatError("CSV row width differs from the header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) throw FormatError("CSV row width differs from the header");
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void emit_csv(const CsvTable& t, const std::string& path) { write_file(path, to_csv(t)); }

inline CsvTable ssf_table(const std::vector<SSFSample>& samples) {
    CsvTable t;
    t.header = {"lambda", "xi", "xi_ac", "xi_s", "xi_s_rounded", "residual", "near_resonance", "extrapolation_quality"};
    for (const SSFSample& s : samples)
        t.rows.push_back({format_number(s.lambda), format_number(s.xi), format_number(s.xi_ac), format_number(s.xi_s),
                          format_number(s.xi_s_rounded), format_number(s.residual), format_flag(s.near_resonance),
                          format_number(s.extrapolation_quality)});
    return t;
}

// ---------------------------------------------------------------- SVG

/// Standalone SVG with axes, one polyline per y column and a legend.
inline std::string render_svg(const CsvTable& t, const std::string& x_col, const std::vector<std::string>& y_cols) {
    const double W = 640, H = 400, L = 60, R = 150, T = 20, B = 40;
    const std::vector<double> xs = numeric_column(t, x_col);
    std::vector<std::vector<double>> ys;
    for (const auto& c : y_cols) ys.push_back(numeric_column(t, c));
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!xs.empty()) {
        x0 = *std::min_element(xs.begin(), xs.end());
        x1 = *std::max_element(xs.begin(), xs.end());
        y0 = std::numeric_limits<double>::infinity();
        y1 = -y0;
        for (const auto& col : ys)
            for (double v : col) {
                y0 = std::min(y0, v);
                y1 = std::max(y1, v);
            }
        if (!std::isfinite(y0)) y0 = 0, y1 = 1;
    }
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << L << "\" y=\"" << H - 10 << "\" font-size=\"11\">" << format_number(x0) << "</text>\n";
    s << "<text x=\"" << W - R << "\" y=\"" << H - 10 << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(x1)
      << "</text>\n";
    s << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(y0)
      << "</text>\n";
    s << "<text x=\"" << L - 4 << "\" y=\"" << T + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << format_number(y1)
      << "</text>\n";
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">" << x_col
      << "</text>\n";
    for (std::size_t c = 0; c < y_cols.size(); ++c) {
        const char* colour = colours[c % 6];
        if (!xs.empty()) {
            s << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
            for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? " " : "") << num(px(xs[i])) << ',' << num(py(ys[c][i]));
            s << "\"/>\n";
        }
        const double ly = T + 15 + 18.0 * static_cast<double>(c);
        s << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 35 << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\"/>\n";
        s << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << y_cols[c] << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

inline void emit_svg(const CsvTable& t, const std::string& x_col, const std::vector<std::string>& y_cols,
                     const std::string& path) {
    write_file(path, render_svg(t, x_col, y_cols));
}

}  // namespace ssfkit::cli
