#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "octroi/eval.hpp"
#include "octroi/experiment/runner.hpp"

namespace octroi::experiment {

/// "0.983 [0.979 - 0.987]"
std::string format_ci(const eval::Estimate& e);
/// "<0.001" below 0.001, three decimals otherwise, "n/a" for NaN.
std::string format_p(double p);

/// ("Whole Image", "IMG"), ("Masking", "ILM-BM"), ("Segmentation only", "RPE-BM"), ...
std::pair<std::string, std::string> display_name(const RoiRequest& request);

std::string table1_markdown(const RunResults& results);
std::string table1_csv(const RunResults& results);
std::string metrics_csv(const RunResults& results);
std::string table2_csv(const RunResults& results);
std::string roc_csv(const std::vector<eval::RocPoint>& points);
std::string roc_svg(const RunResults& results);

/// table1.md, table1.csv, metrics.csv, table2.csv, roc_<variant>.csv, roc.svg and
/// history_<variant>.csv for every variant with a recorded history.
std::vector<std::filesystem::path> emit_report(const RunResults& results, const std::filesystem::path& output_dir);

}  // namespace octroi::experiment
