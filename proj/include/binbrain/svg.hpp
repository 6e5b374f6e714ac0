#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace binbrain {

struct ChartSeries {
  std::string name;
  std::vector<double> values;  // x is the 1-based index (epoch)
};

// Simple deterministic line chart: labeled axes, tick marks, legend.
void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series);

// Heat grid for a row-percentage matrix; cells carry the numeric value.
void write_heat_grid_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<std::string>& labels, const std::vector<double>& row_percent);

}  // namespace binbrain
