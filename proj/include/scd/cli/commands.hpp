// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "scd/cli/config.hpp"
#include "scd/evalkit/evaluate.hpp"

namespace scd::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

/// Maps the exception in flight to an exit code and prints it to `err`.
int report_exception(std::ostream& err);

/// Entry point behind the `scd` binary: synth | train | eval | infer | ablate | pr-plot.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// The commands below throw scd::Error on failure; run() converts errors to
// exit codes. All outputs go under config.out.

int cmd_synth(const CliConfig& config, int count, std::ostream& out);

int cmd_train(const CliConfig& config, const std::filesystem::path& dataset, std::ostream& out);

/// `predictor` replaces the checkpoint model when set.
int cmd_eval(const CliConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
             const std::vector<double>& pr_thresholds, std::ostream& out, const eval::Predictor& predictor = {});

int cmd_infer(const CliConfig& config, const std::filesystem::path& checkpoint, const std::filesystem::path& t0,
              const std::filesystem::path& t1, const std::filesystem::path& mask_path, std::ostream& out);

int cmd_ablate(const CliConfig& config, const std::string& axis, const std::vector<std::string>& values,
               const std::filesystem::path& train_dataset, const std::filesystem::path& test_dataset, std::ostream& out);

int cmd_pr_plot(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_image,
                std::ostream& out);

/// 0.05, 0.10, ..., 0.95
std::vector<double> default_pr_thresholds();

} // namespace scd::cli
