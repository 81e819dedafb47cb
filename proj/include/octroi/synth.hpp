#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "octroi/core.hpp"

namespace octroi {

struct LayerGeometry {
    double ilm_depth = 30.0;          ///< mean ILM row
    double retina_thickness = 60.0;   ///< ILM to RPE, pixels
    double rpe_bm_gap = 3.0;          ///< RPE to BM in healthy tissue, pixels
    double curvature_min = 2.0;       ///< amplitude range of the BM bowl, pixels
    double curvature_max = 10.0;
    double subject_jitter = 3.0;      ///< per-subject offsets of depth and thickness
    double foveal_pit_depth = 12.0;
};

struct DrusenConfig {
    int count_min = 1;                ///< per AMD B-scan; count_max == 0 disables drusen
    int count_max = 3;
    double width_min_um = 150.0;
    double width_max_um = 400.0;
    double height_min_px = 4.0;
    double height_max_px = 10.0;
};

struct ChoroidTexture {
    double mean_intensity = 120.0;
    double blob_density = 0.004;      ///< dark vessel blobs per pixel of the 80-row band under BM
};

struct SynthConfig {
    int image_width = 256;
    int image_height = 192;
    double axial_resolution_um = 3.5;
    double lateral_resolution_um = 20.0;
    int subjects_per_class = 10;
    int bscans_per_subject = 5;
    LayerGeometry geometry;
    DrusenConfig drusen;
    double speckle_sigma = 0.25;
    double shadow_attenuation = 0.6;
    ChoroidTexture choroid;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedSample {
    BScan bscan;
    LayerSegmentation segmentation;
    std::vector<bool> drusen_footprint;
    std::vector<double> drusen_elevation;  ///< RPE lift above its healthy baseline, per column
    Image clean;                           ///< rendered intensities before speckle and quantization
};

GeneratedSample generate_bscan(const SynthConfig& config, std::uint64_t subject_seed, ClassLabel label, int index);

/// Derived per-subject seed; generate_dataset uses this for every subject.
std::uint64_t subject_seed(const SynthConfig& config, const std::string& subject_id);
std::string subject_name(ClassLabel label, int ordinal);

/// Writes scans/, segmentations/ and manifest.json under output_dir.
DatasetManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& output_dir);

/// Base of all dataset loading failures; the message names the offending entry.
class DatasetError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class MissingFileError : public DatasetError {
public:
    using DatasetError::DatasetError;
};
class DimensionMismatchError : public DatasetError {
public:
    using DatasetError::DatasetError;
};
class InvariantViolationError : public DatasetError {
public:
    using DatasetError::DatasetError;
};

struct LoadedSample {
    ManifestEntry entry;
    BScan bscan;
    LayerSegmentation segmentation;
};

std::string segmentation_to_json(const LayerSegmentation& seg);
LayerSegmentation segmentation_from_json(std::string_view text);

std::vector<LoadedSample> load_dataset(const std::filesystem::path& manifest_path);
/// Loads the given entries; relative paths resolve against base_dir.
std::vector<LoadedSample> load_entries(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

}  // namespace octroi
