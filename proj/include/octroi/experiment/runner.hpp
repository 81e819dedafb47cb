#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "octroi/eval.hpp"
#include "octroi/experiment/config.hpp"
#include "octroi/nn/train.hpp"

namespace octroi::experiment {

/// A pipeline stage failed; outputs written so far stay on disk.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// ROI images of one variant at model input size, in split manifest order.
struct RoiSet {
    RoiRequest request;
    std::vector<ManifestEntry> entries;
    std::vector<Image> images;
};

struct VariantResult {
    std::string name;
    RoiRequest request;
    eval::ScoreSet scores;
    eval::MetricsReport metrics;         ///< at the configured threshold
    eval::MetricsReport youden_metrics;  ///< at the Youden-optimal threshold
    std::vector<nn::EpochRecord> history;
};

struct PairComparison {
    std::string a;
    std::string b;
    eval::ComparisonResult result;
};

struct RunResults {
    std::vector<VariantResult> variants;
    std::vector<PairComparison> comparisons;  ///< i < j over variant order
    std::vector<std::filesystem::path> artifacts;
    nlohmann::json config_echo;
    std::map<std::string, double> stage_seconds;
    std::filesystem::path run_dir;
};

/// Progress lines go here; nullptr (the default) silences them.
void set_log_stream(std::ostream* os);

std::uint64_t variant_seed(std::uint64_t run_seed, std::string_view purpose, const std::string& variant);

// Individual stages. Each reads its inputs from run_dir and persists its outputs there.

/// Generates (synth) or locates the dataset; returns the manifest path.
std::filesystem::path stage_dataset(const ExperimentConfig& config, const std::filesystem::path& run_dir);
/// Central-scan selection + subject split; writes split/manifest.json and split/info.json.
DatasetManifest stage_split(const ExperimentConfig& config, const std::filesystem::path& manifest_path,
                            const std::filesystem::path& run_dir);
/// Extracts every variant's ROI images; writes rois/<variant>/...
std::vector<RoiSet> stage_prepare(const ExperimentConfig& config, const std::filesystem::path& run_dir);
RoiSet load_roi_set(const std::filesystem::path& run_dir, const RoiRequest& request);
/// Trains one variant; writes models/<variant>/ and history_<variant>.csv.
nn::TrainResult stage_train(const ExperimentConfig& config, const RoiSet& rois, const std::filesystem::path& run_dir);
/// Scores the test split with the saved model; writes scores/<variant>.csv and metrics/<variant>.json.
VariantResult stage_eval(const ExperimentConfig& config, const RoiSet& rois, const std::filesystem::path& run_dir);
/// Pairwise DeLong tests over persisted score files; writes comparisons.json.
std::vector<PairComparison> stage_compare(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Creates <output_dir>/run-<timestamp>[-n] unless `exact` is set.
std::filesystem::path make_run_dir(const std::filesystem::path& output_dir, bool exact = false);

/// Full pipeline. With `exact_dir` the run writes straight into config.output_dir.
RunResults run_experiment(const ExperimentConfig& config, bool exact_dir = false);
RunResults run_experiment(const std::filesystem::path& config_path);

/// Rebuilds results from a finished run directory (scores, histories, comparisons).
RunResults load_results(const ExperimentConfig& config, const std::filesystem::path& run_dir);

eval::ScoreSet read_scores(const std::filesystem::path& path);
std::string scores_to_csv(const eval::ScoreSet& set, const std::vector<ManifestEntry>& entries);

nlohmann::json metrics_to_json(const eval::MetricsReport& m);
/// Everything reproducible about a run: per-variant metrics and the comparisons.
nlohmann::json results_to_json(const RunResults& results);

}  // namespace octroi::experiment
