#include "tride/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tride/error.hpp"

namespace tride {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    void pad()
    {
        if (!(hi > lo)) {
            const double half = std::max(std::abs(lo) * 0.05, 0.5);
            lo -= half;
            hi += half;
        }
    }
};

} // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series)
{
    Range xr, yr;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size())
            fail(ErrorKind::Shape, "series '" + s.name + "' has mismatched x and y lengths");
        for (double v : s.x)
            xr.add(v);
        for (double v : s.y)
            yr.add(v);
    }
    if (!std::isfinite(xr.lo) || !std::isfinite(yr.lo))
        fail(ErrorKind::EmptyBatch, "chart '" + spec.title + "' has no finite points");
    xr.pad();
    yr.pad();

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = spec.width - left - right;
    const double ph = spec.height - top - bottom;
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * ph; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
           std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(spec.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(spec.title) + "</text>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        svg += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(px(fx)) + "\" y2=\"" +
               num(top + ph + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" +
               tick_label(fx) + "</text>\n";
        svg += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(left) + "\" y2=\"" +
               num(py(fy)) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(fy) + 4) + "\" text-anchor=\"end\">" +
               tick_label(fy) + "</text>\n";
    }
    svg += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(spec.height - 10.0) + "\" text-anchor=\"middle\">" +
           escape(spec.x_label) + "</text>\n";
    svg += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
           num(top + ph / 2) + ")\">" + escape(spec.y_label) + "</text>\n";
    if (spec.zero_line && yr.lo < 0.0 && yr.hi > 0.0)
        svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(0.0)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
               num(py(0.0)) + "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i]))
                continue;
            if (!points.empty())
                points += ' ';
            points += num(px(series[s].x[i])) + ',' + num(py(series[s].y[i]));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\" points=\"" + points +
               "\"/>\n";
        const double ly = top + 14.0 + 14.0 * static_cast<double>(s);
        svg += "<line x1=\"" + num(left + pw - 120) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + pw - 100) +
               "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(left + pw - 95) + "\" y=\"" + num(ly) + "\">" + escape(series[s].name) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace tride
