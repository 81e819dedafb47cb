#pragma once

#include <random>

#include "octroi/core.hpp"

namespace octroi::nn {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Range&) const = default;
};

struct AugmentConfig {
    bool enabled = true;
    Range rotation_degrees{0.0, 10.0};  ///< magnitude; the sign is drawn separately
    bool horizontal_flip = true;
    Range brightness_factor{0.4, 1.2};
    double shift_fraction = 0.05;       ///< per axis
    Range zoom_factor{0.9, 1.2};

    void validate() const;
    bool operator==(const AugmentConfig&) const = default;
};

/// One concrete draw of every transform.
struct AugmentParams {
    double rotation_degrees = 0.0;  ///< signed, counter-clockwise positive
    bool flip = false;
    double brightness = 1.0;
    int shift_rows = 0;             ///< positive moves content down
    int shift_cols = 0;             ///< positive moves content right
    double zoom = 1.0;
};

AugmentParams sample_augment(const AugmentConfig& config, int rows, int cols, std::mt19937_64& rng);

/// rotation -> flip -> brightness (clamped to [0, 255]) -> shift (vacated
/// pixels 0) -> zoom about the centre (zero-padded when shrinking).
Image apply_augment(const Image& image, const AugmentParams& params);

/// Identity when config.enabled is false (the rng is left untouched).
Image augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng);

}  // namespace octroi::nn
