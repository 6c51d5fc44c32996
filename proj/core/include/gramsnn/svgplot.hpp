#pragma once

#include <string>
#include <vector>

namespace gramsnn {

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
};

// Deterministic static SVG line chart (no fonts beyond generic sans-serif,
// byte-identical output for identical input).
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const PlotSeries& series,
                              int width = 640, int height = 400);

// Reads run_dir/run.csv and writes best_fitness.svg, mean_fitness.svg, and a
// merged fitness.csv (gen,best_fit,mean_fit). Throws DataError on a missing,
// malformed, or empty run.csv.
void plot_run(const std::string& run_dir);

}  // namespace gramsnn
