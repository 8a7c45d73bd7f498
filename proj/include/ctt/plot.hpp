#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctt {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;  // same length as x
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 400;
};

/// Renders a line chart as a binary PPM: axes with nice ticks, one colored
/// polyline per series (fixed palette, cycled), legend in the top margin.
/// Output bytes are a pure function of the inputs. Throws ConfigError when
/// no series has a point or a series has mismatched x/y lengths.
void render_chart(const std::vector<Series>& series, const ChartOptions& opt,
                  const std::filesystem::path& path);

}  // namespace ctt
