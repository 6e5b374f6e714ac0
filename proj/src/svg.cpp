#include "binbrain/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "binbrain/errors.hpp"
#include "binbrain/util.hpp"

namespace binbrain {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMarginLeft = 60;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string coord(double v) { return fmt_fixed(v, 2); }

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  if (series.empty()) fail(Errc::invalid_config, "chart needs at least one series");
  std::size_t points = 0;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& s : series) {
    points = std::max(points, s.values.size());
    for (double v : s.values) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  if (points == 0) fail(Errc::invalid_config, "chart series are empty");
  if (hi - lo < 1e-12) {
    hi += 0.5;
    lo -= 0.5;
  }

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto x_of = [&](std::size_t i) {
    return kMarginLeft + (points == 1 ? plot_w / 2 : plot_w * static_cast<double>(i) / (points - 1));
  };
  auto y_of = [&](double v) { return kMarginTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  // axes
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
      << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
      << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  out << "<text x=\"15\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
      << coord(kMarginTop + plot_h / 2) << ")\">" << y_label << "</text>\n";
  // y ticks
  for (int t = 0; t <= 4; ++t) {
    double v = lo + (hi - lo) * t / 4.0;
    double y = y_of(v);
    out << "<line x1=\"" << kMarginLeft - 4 << "\" y1=\"" << coord(y) << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << coord(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_fixed(v, 3) << "</text>\n";
  }
  // x ticks: first, mid, last epoch
  for (std::size_t i : {std::size_t{0}, points / 2, points - 1}) {
    double x = x_of(i);
    out << "<line x1=\"" << coord(x) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << coord(x)
        << "\" y2=\"" << kMarginTop + plot_h + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << coord(x) << "\" y=\"" << kMarginTop + plot_h + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << i + 1 << "</text>\n";
  }
  // series
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.values.size(); ++i) {
      if (i) out << " ";
      out << coord(x_of(i)) << "," << coord(y_of(ser.values[i]));
    }
    out << "\"/>\n";
    double ly = kMarginTop + 14.0 * static_cast<double>(s);
    out << "<rect x=\"" << kMarginLeft + plot_w - 150 << "\" y=\"" << coord(ly) << "\" width=\"10\" height=\"10\" fill=\""
        << color << "\"/>\n";
    out << "<text x=\"" << kMarginLeft + plot_w - 136 << "\" y=\"" << coord(ly + 9)
        << "\" font-size=\"10\">" << ser.name << "</text>\n";
  }
  out << "</svg>\n";
  write_file_text(path, out.str());
}

void write_heat_grid_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<std::string>& labels, const std::vector<double>& row_percent) {
  const std::size_t k = labels.size();
  if (row_percent.size() != k * k) fail(Errc::invalid_config, "heat grid needs a KxK matrix");
  const int cell = 70;
  const int left = 90, top = 70;
  const int width = left + static_cast<int>(k) * cell + 20;
  const int height = top + static_cast<int>(k) * cell + 20;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  for (std::size_t c = 0; c < k; ++c)
    out << "<text x=\"" << left + static_cast<int>(c) * cell + cell / 2 << "\" y=\"" << top - 10
        << "\" text-anchor=\"middle\" font-size=\"11\">" << labels[c] << "</text>\n";
  for (std::size_t r = 0; r < k; ++r) {
    out << "<text x=\"" << left - 8 << "\" y=\"" << top + static_cast<int>(r) * cell + cell / 2 + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << labels[r] << "</text>\n";
    for (std::size_t c = 0; c < k; ++c) {
      double pct = row_percent[r * k + c];
      // interpolate white -> steel blue with intensity
      int shade = static_cast<int>(std::lround(255.0 - 2.05 * pct));
      shade = std::clamp(shade, 50, 255);
      out << "<rect x=\"" << left + static_cast<int>(c) * cell << "\" y=\"" << top + static_cast<int>(r) * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << "," << shade
          << ",255)\" stroke=\"black\"/>\n";
      out << "<text x=\"" << left + static_cast<int>(c) * cell + cell / 2 << "\" y=\""
          << top + static_cast<int>(r) * cell + cell / 2 + 4 << "\" text-anchor=\"middle\" font-size=\"12\">"
          << fmt_fixed(pct, 1) << "</text>\n";
    }
  }
  out << "</svg>\n";
  write_file_text(path, out.str());
}

}  // namespace binbrain
