#pragma once
// Static SVG plots: line/scatter plots with optional log axes and heatmaps.

#include <filesystem>
#include <string>
#include <vector>

namespace nlv {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers_only = false;
};

struct LinePlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

/// Nonpositive values on a log axis and non-finite values are skipped.
void write_line_plot(const LinePlot& plot, const std::filesystem::path& path);

struct Heatmap {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<std::string> x_ticks;  // columns
  std::vector<std::string> y_ticks;  // rows
  std::vector<std::vector<double>> values;  // [row][column]
  bool log_scale = true;
};

void write_heatmap(const Heatmap& map, const std::filesystem::path& path);

}  // namespace nlv
