// SPDX-License-Identifier: Apache-2.0

#include "scd/evalkit/report.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace scd::eval {
namespace {

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

} // namespace

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  using nlohmann::ordered_json;
  ordered_json per_image = ordered_json::array();
  for (const auto& r : report.per_image)
    per_image.push_back({{"id", r.id},
                         {"pred_regions", r.pred_regions},
                         {"gt_regions", r.gt_regions},
                         {"tp", r.match.tp},
                         {"fp", r.match.fp},
                         {"fn", r.match.fn}});
  const ordered_json doc = {
      {"config",
       {{"binarize_threshold", report.config.binarize_threshold},
        {"connectivity", static_cast<int>(report.config.connectivity)},
        {"min_area", report.config.min_area},
        {"match_mode", to_string(report.config.match_mode)},
        {"iou_tau", report.config.iou_tau},
        {"symmetric", report.config.symmetric},
        {"averaging", "micro"},
        {"zero_denominator", "precision=1 when TP+FP=0, recall=1 when TP+FN=0"}}},
      {"aggregate",
       {{"tp", report.tp},
        {"fp", report.fp},
        {"fn", report.fn},
        {"precision", report.metrics.precision},
        {"recall", report.metrics.recall},
        {"f1", report.metrics.f1}}},
      {"per_image", per_image}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_per_image_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,pred_regions,gt_regions,tp,fp,fn\n";
  for (const auto& r : report.per_image)
    out << r.id << ',' << r.pred_regions << ',' << r.gt_regions << ',' << r.match.tp << ',' << r.match.fp << ','
        << r.match.fn << '\n';
}

void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,precision,recall\n";
  for (const auto& p : curve.points) out << fmt(p.threshold) << ',' << fmt(p.precision) << ',' << fmt(p.recall) << '\n';
}

std::vector<PrPoint> read_pr_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("missing file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("threshold,precision,recall", 0) != 0)
    throw FormatError(path.string() + ": expected header 'threshold,precision,recall'");
  std::vector<PrPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    PrPoint p;
    char c1 = 0, c2 = 0;
    if (!(row >> p.threshold >> c1 >> p.precision >> c2 >> p.recall) || c1 != ',' || c2 != ',')
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
    points.push_back(p);
  }
  if (points.empty()) throw FormatError(path.string() + ": no points");
  return points;
}

std::string summary_line(const Prf1& m) {
  return "P=" + fmt(m.precision, 3) + " R=" + fmt(m.recall, 3) + " F1=" + fmt(m.f1, 3);
}

} // namespace scd::eval
