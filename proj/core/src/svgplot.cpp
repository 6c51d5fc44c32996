#include "gramsnn/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gramsnn/errors.hpp"

namespace fs = std::filesystem;

namespace gramsnn {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string fmt_coord(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const PlotSeries& series,
                              int width, int height) {
  const double ml = 60, mr = 20, mt = 40, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!series.x.empty()) {
    xmin = *std::min_element(series.x.begin(), series.x.end());
    xmax = *std::max_element(series.x.begin(), series.x.end());
    ymin = *std::min_element(series.y.begin(), series.y.end());
    ymax = *std::max_element(series.y.begin(), series.y.end());
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = (ymax - ymin) * 0.05;
  ymin -= ypad;
  ymax += ypad;

  const auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  // axes
  out << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(mt + ph) << "\" x2=\""
      << fmt_coord(ml + pw) << "\" y2=\"" << fmt_coord(mt + ph)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(mt) << "\" x2=\""
      << fmt_coord(ml) << "\" y2=\"" << fmt_coord(mt + ph) << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << fmt_coord(px(xv)) << "\" y=\"" << fmt_coord(mt + ph + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(xv) << "</text>\n";
    out << "<text x=\"" << fmt_coord(ml - 6) << "\" y=\"" << fmt_coord(py(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
      << "transform=\"rotate(-90 16 " << height / 2 << ")\">" << y_label << "</text>\n";

  if (!series.x.empty()) {
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series.x.size(); ++i) {
      if (i) out << ' ';
      out << fmt_coord(px(series.x[i])) << ',' << fmt_coord(py(series.y[i]));
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < series.x.size(); ++i)
      out << "<circle cx=\"" << fmt_coord(px(series.x[i])) << "\" cy=\""
          << fmt_coord(py(series.y[i])) << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void plot_run(const std::string& run_dir) {
  const fs::path csv_path = fs::path(run_dir) / "run.csv";
  std::ifstream in(csv_path);
  if (!in) throw DataError(DataError::Kind::Missing, "no run.csv in " + run_dir);

  std::string line;
  if (!std::getline(in, line) || !line.starts_with("gen,best_fit,mean_fit"))
    throw DataError(DataError::Kind::BadMagic, "malformed run.csv header in " + run_dir);

  PlotSeries best, mean;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string gen_s, best_s, mean_s;
    if (!std::getline(row, gen_s, ',') || !std::getline(row, best_s, ',') ||
        !std::getline(row, mean_s, ','))
      throw DataError(DataError::Kind::Truncated,
                      "malformed run.csv row " + std::to_string(lineno));
    try {
      const double gen = std::stod(gen_s);
      best.x.push_back(gen);
      best.y.push_back(std::stod(best_s));
      mean.x.push_back(gen);
      mean.y.push_back(std::stod(mean_s));
    } catch (const std::exception&) {
      throw DataError(DataError::Kind::Truncated,
                      "malformed run.csv row " + std::to_string(lineno));
    }
  }
  if (best.x.empty())
    throw DataError(DataError::Kind::Truncated, "run.csv has no data rows: " + run_dir);

  std::ofstream(fs::path(run_dir) / "best_fitness.svg", std::ios::trunc)
      << render_line_chart("Best Fitness", "generation", "fitness", best);
  std::ofstream(fs::path(run_dir) / "mean_fitness.svg", std::ios::trunc)
      << render_line_chart("Average Fitness", "generation", "fitness", mean);

  std::ofstream merged(fs::path(run_dir) / "fitness.csv", std::ios::trunc);
  merged << "gen,best_fit,mean_fit\n";
  for (std::size_t i = 0; i < best.x.size(); ++i)
    merged << static_cast<long long>(best.x[i]) << ',' << best.y[i] << ',' << mean.y[i]
           << '\n';
}

}  // namespace gramsnn
