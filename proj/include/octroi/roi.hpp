#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "octroi/core.hpp"

namespace octroi {

enum class RoiKind { WholeImage, IlmBm, RpeBm, BmCho, RpeBmMaskOnly };
enum class RoiMethod { None, Masking, Cropping };

std::string_view to_string(RoiKind kind);
std::string_view to_string(RoiMethod method);
RoiKind parse_roi_kind(std::string_view text);
RoiMethod parse_roi_method(std::string_view text);

struct RoiRequest {
    RoiKind kind = RoiKind::WholeImage;
    RoiMethod method = RoiMethod::None;
    int choroid_offset = 80;
    int target_rows = 224;
    int target_cols = 224;
    bool pad_below = false;  ///< zero-pad crops that run past the image bottom instead of failing

    /// Normalizes `method` to None for the method-less kinds.
    void validate();
    /// "img", "rpe-bm-mask", or "<method>-<kind>", e.g. "cropping-bm-cho".
    std::string name() const;
};

/// A crop that needs rows below the image bottom.
class RoiBoundsError : public std::runtime_error {
public:
    RoiBoundsError(const std::string& what, int deficit) : std::runtime_error(what), deficit_(deficit) {}
    int deficit() const { return deficit_; }

private:
    int deficit_;
};

struct FlattenResult {
    BScan image;
    std::vector<int> shifts;         ///< positive values move a column down
    LayerSegmentation segmentation;  ///< every curve moved by the column's shift
    int reference_row = 0;           ///< round(mean BM), the row BM is flattened onto
};

FlattenResult flatten(const BScan& bscan, const LayerSegmentation& seg);

/// Keeps pixels with round(upper[c]) <= r <= round(lower[c]); zeroes the rest.
Image mask_band(const Image& image, const std::vector<double>& upper, const std::vector<double>& lower);

/// Binary {0, 1} image of the RPE-BM band.
Image rpe_bm_mask(const BScan& bscan, const LayerSegmentation& seg);

/// Region before resizing. Cropping flattens internally; the other paths keep the frame.
Image extract_roi(const BScan& bscan, const LayerSegmentation& seg, const RoiRequest& request);

/// Bilinear, corner-aligned: output (i, j) samples input at
/// (i (R-1)/(r-1), j (C-1)/(c-1)). Results are clamped to [0, 255].
Image resize(const Image& image, int rows, int cols);

/// extract -> (mask scaled to 0/255) -> resize -> 8-bit quantization. This is the
/// exact image the classifier sees and the one written to disk.
Image prepare_model_input(const BScan& bscan, const LayerSegmentation& seg, const RoiRequest& request);

}  // namespace octroi
