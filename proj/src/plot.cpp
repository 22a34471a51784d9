#include "fradiag/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fradiag {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v, int decimals = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string escape(const std::string& s) {
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

std::string svg_open(const std::string& title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text class=\"title\" x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
    return o.str();
}

struct Axis {
    double lo, hi;
    bool log = false;

    double map(double v, double a, double b) const {
        const double t = log ? (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo)) : (v - lo) / (hi - lo);
        return a + t * (b - a);
    }
};

Axis padded(double lo, double hi) {
    if (hi <= lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::string frame(const Axis& x, const Axis& y, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream o;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    o << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0) << "\" height=\""
      << fmt(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double t = i / 5.0;
        const double xv = x.log ? std::pow(10.0, std::log10(x.lo) + t * (std::log10(x.hi) - std::log10(x.lo)))
                                : x.lo + t * (x.hi - x.lo);
        const double yv = y.lo + t * (y.hi - y.lo);
        const double px = x0 + t * (x1 - x0), py = y0 + t * (y1 - y0);
        o << "<text class=\"tick\" x=\"" << fmt(px) << "\" y=\"" << fmt(y0 + 16) << "\" text-anchor=\"middle\">"
          << (x.log ? fmt(xv, 0) : fmt(xv, 2)) << "</text>\n";
        o << "<text class=\"tick\" x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\">"
          << fmt(yv, 1) << "</text>\n";
    }
    o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
    o << "<text x=\"16\" y=\"" << fmt((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt((y0 + y1) / 2) << ")\">" << escape(ylabel) << "</text>\n";
    return o.str();
}

}  // namespace

PlotFiles bode_plot(const FrequencyGrid& grid, std::span<const BodeSeries> series, const std::string& title) {
    if (series.empty()) throw DomainError("bode plot needs at least one curve");
    double lo = series.front().sweep.values.minCoeff(), hi = series.front().sweep.values.maxCoeff();
    for (const auto& s : series) {
        if (static_cast<std::size_t>(s.sweep.values.size()) != grid.size() || s.sweep.grid_id != grid.id())
            throw DomainError("curve '" + s.label + "' is not on the plot grid");
        lo = std::min<double>(lo, s.sweep.values.minCoeff());
        hi = std::max<double>(hi, s.sweep.values.maxCoeff());
    }
    const Axis x{grid.f_min(), grid.f_max(), true};
    const Axis y = padded(lo, hi);

    std::ostringstream svg;
    svg << svg_open(title) << frame(x, y, "Frequency (Hz)", "Magnitude (dB)");
    for (std::size_t k = 0; k < series.size(); ++k) {
        svg << "<polyline class=\"curve\" fill=\"none\" stroke-width=\"1\" stroke=\"" << kPalette[k % 10] << "\" points=\"";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (i) svg << ' ';
            svg << fmt(x.map(grid[i], kLeft, kWidth - kRight)) << ','
                << fmt(y.map(series[k].sweep.values[static_cast<Eigen::Index>(i)], kHeight - kBottom, kTop));
        }
        svg << "\"/>\n";
        svg << "<text class=\"legend\" x=\"" << fmt(kWidth - kRight - 8) << "\" y=\"" << fmt(kTop + 16 + 14.0 * k)
            << "\" text-anchor=\"end\" fill=\"" << kPalette[k % 10] << "\">" << escape(series[k].label) << "</text>\n";
    }
    svg << "</svg>\n";

    std::ostringstream csv;
    csv << "frequency_hz";
    for (const auto& s : series) csv << ',' << s.label;
    csv << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", grid[i]);
        csv << buf;
        for (const auto& s : series) csv << ',' << fmt(s.sweep.values[static_cast<Eigen::Index>(i)], 4);
        csv << '\n';
    }
    return {svg.str(), csv.str()};
}

PlotFiles confusion_plot(const ConfusionMatrix& cm, const std::vector<std::string>& class_names, const std::string& title) {
    if (cm.classes() == 0 || cm.total() == 0) throw DomainError("confusion plot of an empty matrix");
    if (static_cast<int>(class_names.size()) != cm.classes()) throw DomainError("class name count mismatch");
    const int c = cm.classes();
    const double side = std::min(kWidth - kLeft - kRight - 60, kHeight - kTop - kBottom - 40);
    const double cell = side / c;
    const double x0 = kLeft + 60, y0 = kTop + 10;

    std::ostringstream svg;
    svg << svg_open(title);
    for (int r = 0; r < c; ++r) {
        const long long row_total = cm.counts().row(r).sum();
        for (int p = 0; p < c; ++p) {
            const double share = row_total > 0 ? static_cast<double>(cm(r, p)) / static_cast<double>(row_total) : 0.0;
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - share)));
            char fill[16];
            std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
            const double cx = x0 + p * cell, cy = y0 + r * cell;
            svg << "<rect x=\"" << fmt(cx) << "\" y=\"" << fmt(cy) << "\" width=\"" << fmt(cell) << "\" height=\""
                << fmt(cell) << "\" fill=\"" << fill << "\" stroke=\"#888\"/>\n";
            svg << "<text class=\"cell\" x=\"" << fmt(cx + cell / 2) << "\" y=\"" << fmt(cy + cell / 2 + 4)
                << "\" text-anchor=\"middle\" fill=\"" << (share > 0.5 ? "white" : "black") << "\">" << cm(r, p)
                << "</text>\n";
        }
        svg << "<text class=\"row\" x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(y0 + r * cell + cell / 2 + 4)
            << "\" text-anchor=\"end\">" << escape(class_names[static_cast<std::size_t>(r)]) << "</text>\n";
    }
    for (int p = 0; p < c; ++p)
        svg << "<text class=\"col\" x=\"" << fmt(x0 + p * cell + cell / 2) << "\" y=\"" << fmt(y0 + side + 16)
            << "\" text-anchor=\"middle\">" << escape(class_names[static_cast<std::size_t>(p)]) << "</text>\n";
    svg << "<text x=\"" << fmt(x0 + side / 2) << "\" y=\"" << fmt(y0 + side + 34) << "\" text-anchor=\"middle\">Predicted</text>\n";
    svg << "<text x=\"16\" y=\"" << fmt(y0 + side / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << fmt(y0 + side / 2) << ")\">True</text>\n";
    svg << "</svg>\n";

    std::ostringstream csv;
    csv << "truth\\predicted";
    for (const auto& n : class_names) csv << ',' << n;
    csv << '\n';
    for (int r = 0; r < c; ++r) {
        csv << class_names[static_cast<std::size_t>(r)];
        for (int p = 0; p < c; ++p) csv << ',' << cm(r, p);
        csv << '\n';
    }
    return {svg.str(), csv.str()};
}

PlotFiles cced_plot(const CurveStats& stats, const std::string& title) {
    if (stats.points.empty()) throw DomainError("CC-ED plot needs at least one point");
    double cc_lo = stats.points.front().cc, cc_hi = cc_lo, ed_lo = stats.points.front().ed, ed_hi = ed_lo;
    for (const auto& p : stats.points) {
        cc_lo = std::min(cc_lo, p.cc);
        cc_hi = std::max(cc_hi, p.cc);
        ed_lo = std::min(ed_lo, p.ed);
        ed_hi = std::max(ed_hi, p.ed);
    }
    const Axis x = padded(cc_lo, cc_hi);
    const Axis y = padded(ed_lo, ed_hi);

    std::ostringstream svg;
    svg << svg_open(title) << frame(x, y, "CC", "ED (dB)");
    for (const auto& p : stats.points)
        svg << "<circle class=\"point\" cx=\"" << fmt(x.map(p.cc, kLeft, kWidth - kRight)) << "\" cy=\""
            << fmt(y.map(p.ed, kHeight - kBottom, kTop)) << "\" r=\"3\" fill=\"" << kPalette[p.label.degree % 10]
            << "\" fill-opacity=\"0.7\"/>\n";
    int row = 0;
    for (const auto& [degree, mean] : stats.degree_means)
        svg << "<text class=\"legend\" x=\"" << fmt(kWidth - kRight - 8) << "\" y=\"" << fmt(kTop + 16 + 14.0 * row++)
            << "\" text-anchor=\"end\" fill=\"" << kPalette[degree % 10] << "\">"
            << (degree == 0 ? std::string("Normal") : "degree " + std::to_string(degree)) << "</text>\n";
    svg << "</svg>\n";

    std::ostringstream csv;
    csv << "type,degree,position,cc,ed\n";
    for (const auto& p : stats.points)
        csv << to_string(p.label.type) << ',' << p.label.degree << ',' << p.label.position << ',' << fmt(p.cc, 9) << ','
            << fmt(p.ed, 6) << '\n';
    return {svg.str(), csv.str()};
}

void write_plot(const PlotFiles& plot, const std::string& svg_path) {
    std::filesystem::path svg(svg_path);
    if (svg.has_parent_path()) std::filesystem::create_directories(svg.parent_path());
    std::filesystem::path csv = svg;
    csv.replace_extension(".csv");
    for (const auto& [path, text] : {std::pair{svg, &plot.svg}, std::pair{csv, &plot.csv}}) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << *text;
    }
}

}  // namespace fradiag
