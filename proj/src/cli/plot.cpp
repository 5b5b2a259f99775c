// SPDX-License-Identifier: Apache-2.0

#include "scd/cli/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scd::cli {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 180, kTop = 40, kBottom = 60;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

double px(double recall) { return kLeft + recall * (kWidth - kLeft - kRight); }
double py(double precision) { return kHeight - kBottom - precision * (kHeight - kTop - kBottom); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

} // namespace

void write_pr_plot_svg(const std::vector<LabeledCurve>& curves, const std::filesystem::path& path) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << px(0.5) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Precision-recall</text>\n";

  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    svg << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(px(v)) << "\" y2=\""
        << num(py(1)) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<line x1=\"" << num(px(0)) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(px(1)) << "\" y2=\""
        << num(py(v)) << "\" stroke=\"#e0e0e0\"/>\n";
    if (i % 2 == 0) {
      svg << "<text x=\"" << num(px(v)) << "\" y=\"" << num(py(0) + 18) << "\" text-anchor=\"middle\">" << num(v).substr(0, 3)
          << "</text>\n";
      svg << "<text x=\"" << num(px(0) - 8) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v).substr(0, 3)
          << "</text>\n";
    }
  }
  svg << "<rect x=\"" << num(px(0)) << "\" y=\"" << num(py(1)) << "\" width=\"" << num(px(1) - px(0)) << "\" height=\""
      << num(py(0) - py(1)) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << num(px(0.5)) << "\" y=\"" << num(kHeight - 18) << "\" text-anchor=\"middle\">Recall</text>\n";
  svg << "<text transform=\"translate(20," << num(py(0.5)) << ") rotate(-90)\" text-anchor=\"middle\">Precision</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % kColors.size()];
    std::vector<eval::PrPoint> pts = curves[c].points;
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.recall < b.recall; });
    if (pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& p : pts) svg << num(px(p.recall)) << ',' << num(py(p.precision)) << ' ';
      svg << "\"/>\n";
    }
    for (const auto& p : pts)
      svg << "<circle cx=\"" << num(px(p.recall)) << "\" cy=\"" << num(py(p.precision)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    const double ly = kTop + 20 + 20 * static_cast<double>(c);
    svg << "<line x1=\"" << num(kWidth - kRight + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kWidth - kRight + 40)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(kWidth - kRight + 46) << "\" y=\"" << num(ly + 4) << "\">" << escape(curves[c].label)
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << svg.str();
}

} // namespace scd::cli
