// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scd/evalkit/evaluate.hpp"

namespace scd::eval {

/// JSON report: config echo, aggregate counts and metrics, per-image rows.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);

/// Header row `id,pred_regions,gt_regions,tp,fp,fn` then one row per image.
void write_per_image_csv(const EvalReport& report, const std::filesystem::path& path);

/// Header row `threshold,precision,recall` then one row per point.
void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path);

/// Throws FormatError for a missing header, malformed rows or no points.
std::vector<PrPoint> read_pr_csv(const std::filesystem::path& path);

/// "P=0.812 R=0.790 F1=0.801"
std::string summary_line(const Prf1& m);

} // namespace scd::eval
