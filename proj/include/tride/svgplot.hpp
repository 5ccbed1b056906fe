#pragma once

#include <string>
#include <vector>

namespace tride {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 400;
    bool zero_line = false; // dashed horizontal line at y = 0 when in range
};

/// Static line chart with axes, ticks, a legend and one polyline per series.
/// Output depends only on the inputs, so equal data gives identical bytes.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);

} // namespace tride
