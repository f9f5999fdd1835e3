#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace statconsist {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Renders the series as coloured polylines on shared, auto-scaled axes and
// writes an RGB PNG. There is no text; the caller documents the series order.
void line_plot(const std::filesystem::path& path, const std::vector<Series>& series, std::size_t width = 480,
               std::size_t height = 320);

}  // namespace statconsist
