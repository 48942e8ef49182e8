#pragma once

// Deterministic writers: CSV with a header row, JSON with insertion-ordered
// keys, minimal SVG polylines and ASCII PGM images.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ramsey/core.hpp"

namespace ramsey::cli {

using Json = nlohmann::ordered_json;

/// %.12g, with nan/inf spelled the same on every platform.
inline std::string fmt(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

/// JSON has no inf/nan; they become null.
inline Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

class Table
{
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(const std::vector<double>& row)
    {
        require(row.size() == header_.size(), "table: row width differs from header");
        rows_.push_back(row);
    }

    std::size_t size() const { return rows_.size(); }

    std::vector<double> column(const std::string& name) const
    {
        const auto it = std::find(header_.begin(), header_.end(), name);
        require(it != header_.end(), "table: no column '" + name + "'");
        const auto c = std::size_t(it - header_.begin());
        std::vector<double> out;
        for (const auto& r : rows_) out.push_back(r[c]);
        return out;
    }

    std::string csv() const
    {
        std::string s;
        for (std::size_t i = 0; i < header_.size(); ++i) s += (i ? "," : "") + header_[i];
        s += "\n";
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt(r[i]);
            s += "\n";
        }
        return s;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

/// Reads a numeric CSV with a header row. Blank lines are skipped.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("csv: cannot open '" + path.string() + "'");
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
        }
        return out;
    };
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("csv: '" + path.string() + "' is empty");
    const auto header = split(line);
    std::vector<std::vector<double>> rows;
    int n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw InvalidArgument("csv: " + path.string() + " line " + std::to_string(n) + " has " +
                                  std::to_string(cells.size()) + " fields, header has " +
                                  std::to_string(header.size()));
        std::vector<double> row;
        for (const auto& c : cells) {
            std::size_t used = 0;
            double x = NAN;
            try {
                x = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != c.size())
                throw InvalidArgument("csv: " + path.string() + " line " + std::to_string(n) + ": '" + c +
                                      "' is not a number");
            row.push_back(x);
        }
        rows.push_back(std::move(row));
    }
    return {header, rows};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("output: cannot write '" + path.string() + "'");
    out << text;
}

struct PlotSpec
{
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
};

namespace detail {

inline std::string escape_xml(const std::string& s)
{
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline std::string coord(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

} // namespace detail

/// One polyline with axes and five ticks per axis. Non-finite points are skipped.
inline std::string svg_plot(const std::vector<double>& x, const std::vector<double>& y, const PlotSpec& spec)
{
    require(x.size() == y.size(), "svg: x and y lengths differ");
    const double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double yy = spec.log_y ? (y[i] > 0 ? std::log10(y[i]) : NAN) : y[i];
        if (std::isfinite(x[i]) && std::isfinite(yy)) pts.emplace_back(x[i], yy);
    }
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
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
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) {
        const double pad = y0 == 0 ? 1 : 0.1 * std::fabs(y0);
        y0 -= pad;
        y1 += pad;
    }
    auto px = [&](double a) { return left + (a - x0) / (x1 - x0) * (w - left - right); };
    auto py = [&](double b) { return h - bottom - (b - y0) / (y1 - y0) * (h - top - bottom); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    s << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    s << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << detail::escape_xml(spec.title) << "</text>\n";
    s << "<g stroke=\"black\" stroke-width=\"1\">\n";
    s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
      << "\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double a = x0 + (x1 - x0) * i / 4, b = y0 + (y1 - y0) * i / 4;
        s << "<line x1=\"" << detail::coord(px(a)) << "\" y1=\"" << h - bottom << "\" x2=\"" << detail::coord(px(a))
          << "\" y2=\"" << h - bottom + 5 << "\"/>\n";
        s << "<line x1=\"" << left - 5 << "\" y1=\"" << detail::coord(py(b)) << "\" x2=\"" << left << "\" y2=\""
          << detail::coord(py(b)) << "\"/>\n";
    }
    s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double a = x0 + (x1 - x0) * i / 4, b = y0 + (y1 - y0) * i / 4;
        char lab[32];
        std::snprintf(lab, sizeof lab, "%.4g", a);
        s << "<text x=\"" << detail::coord(px(a)) << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">"
          << lab << "</text>\n";
        std::snprintf(lab, sizeof lab, "%.4g", spec.log_y ? std::pow(10.0, b) : b);
        s << "<text x=\"" << left - 8 << "\" y=\"" << detail::coord(py(b) + 4) << "\" text-anchor=\"end\">" << lab
          << "</text>\n";
    }
    s << "<text x=\"" << detail::coord(0.5 * (left + w - right)) << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\">" << detail::escape_xml(spec.x_label) << "</text>\n";
    s << "<text transform=\"translate(16," << detail::coord(0.5 * (top + h - bottom))
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape_xml(spec.y_label) << "</text>\n</g>\n";
    s << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
        s << (i ? " " : "") << detail::coord(px(pts[i].first)) << "," << detail::coord(py(pts[i].second));
    s << "\"/>\n</svg>\n";
    return s.str();
}

/// ASCII graymap of rounded, clipped counts; rows run along v.
inline std::string pgm(const std::vector<double>& values, int width, int height)
{
    require(values.size() == std::size_t(width) * std::size_t(height), "pgm: size mismatch");
    long maxval = 1;
    std::vector<long> v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        v[i] = std::clamp(std::lround(values[i]), 0L, 65535L);
        maxval = std::max(maxval, v[i]);
    }
    std::ostringstream s;
    s << "P2\n" << width << " " << height << "\n" << maxval << "\n";
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) s << (c ? " " : "") << v[std::size_t(r) * std::size_t(width) + std::size_t(c)];
        s << "\n";
    }
    return s.str();
}

} // namespace ramsey::cli
