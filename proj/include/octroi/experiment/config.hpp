#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "octroi/eval.hpp"
#include "octroi/nn/model.hpp"
#include "octroi/nn/train.hpp"
#include "octroi/roi.hpp"
#include "octroi/synth.hpp"

namespace octroi::experiment {

struct DatasetSource {
    std::optional<std::filesystem::path> manifest;
    std::optional<SynthConfig> synth;
};

struct EvalConfig {
    int bootstrap_B = 1000;
    double alpha = 0.05;
    double threshold = 0.5;
    eval::DelongMode delong_mode = eval::DelongMode::Unpaired;
};

struct ExperimentConfig {
    DatasetSource dataset;
    double keep_fraction = 0.4;
    SplitRatios split_ratios{0.8, 0.1, 0.1};
    std::vector<RoiRequest> roi_variants;
    nn::ModelConfig model;
    nn::TrainConfig train;
    EvalConfig eval;
    std::filesystem::path output_dir = "runs";
    std::uint64_t seed = 42;
    int threads = 1;

    /// Fills in the eight default variants when none are given and checks
    /// cross-field consistency (variant sizes follow the model input size).
    void finalize();
};

/// IMG; masking and cropping of ilm-bm, rpe-bm, bm-cho; rpe-bm-mask.
std::vector<RoiRequest> default_roi_variants();

/// Accepts "img", "rpe-bm-mask" and "<method>-<kind>" (e.g. "masking-bm-cho").
RoiRequest parse_variant_name(std::string_view name);

/// Strict parse: unknown keys anywhere are ValidationErrors. Relative manifest
/// paths resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
SynthConfig parse_synth_config(const nlohmann::json& j, std::uint64_t default_seed);

nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json synth_config_to_json(const SynthConfig& config);

}  // namespace octroi::experiment
