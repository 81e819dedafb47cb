#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace octroi {

/// Bad input: malformed config, violated precondition, unreadable record.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ClassLabel { Control, AMD };

enum class Split { Train, Val, Test };

std::string_view to_string(ClassLabel label);
std::string_view to_string(Split split);
ClassLabel parse_label(std::string_view text);
Split parse_split(std::string_view text);

inline int label_value(ClassLabel label) { return label == ClassLabel::AMD ? 1 : 0; }

/// Row-major single-channel image. Values are grayscale intensities,
/// nominally in [0, 255] (binary masks use {0, 1}).
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<float> px;

    Image() = default;
    Image(int rows_, int cols_, float fill = 0.0f);

    float& at(int r, int c) { return px[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return px[static_cast<std::size_t>(r) * cols + c]; }
    bool empty() const { return px.empty(); }

    bool operator==(const Image&) const = default;
};

struct BScan {
    Image image;
    std::string subject_id;
    std::string volume_id;
    int index_in_volume = 0;
    ClassLabel label = ClassLabel::Control;

    int width() const { return image.cols; }
    int height() const { return image.rows; }

    bool operator==(const BScan&) const = default;
};

/// Per-column row positions of the three boundaries, rows growing downward.
struct LayerSegmentation {
    std::vector<double> ilm;
    std::vector<double> rpe;
    std::vector<double> bm;

    int width() const { return static_cast<int>(bm.size()); }

    bool operator==(const LayerSegmentation&) const = default;
};

/// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> check_segmentation(const LayerSegmentation& seg, int width, int height);

struct ManifestEntry {
    std::string subject_id;
    ClassLabel label = ClassLabel::Control;
    std::string volume_id;
    std::string scan_path;
    std::string segmentation_path;
    int index_in_volume = 0;
    Split split = Split::Train;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    /// Throws ValidationError on duplicate (volume, index) pairs or on a
    /// subject whose entries disagree on label or split.
    void validate() const;

    bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view text);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

using SplitRatios = std::array<double, 3>;

/// Class-stratified subject-level split. Per class, subject counts follow the
/// largest-remainder rounding of the ratios; subjects are shuffled with the seed
/// before being dealt out.
DatasetManifest split_subjects(const DatasetManifest& manifest, const SplitRatios& ratios,
                               std::uint64_t seed);

/// Largest-remainder apportionment of `total` items over `ratios`. Ties in the
/// remainders go to the lower split index.
std::array<int, 3> apportion(int total, const SplitRatios& ratios);

struct IndexRange {
    int first = 0;  ///< inclusive
    int last = 0;   ///< inclusive
    int size() const { return last - first + 1; }
};

/// Centered contiguous window of round(n * keep_fraction) indices (at least one).
IndexRange select_central_bscans(int n, double keep_fraction);

/// Keeps the entries whose index lies in the central window of their volume.
DatasetManifest filter_central(const DatasetManifest& manifest, double keep_fraction);

/// Stateless 64-bit mixer used to derive independent RNG streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream);

void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace octroi
