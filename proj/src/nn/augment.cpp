#include "octroi/nn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace octroi::nn {

void AugmentConfig::validate() const {
    auto check = [](const Range& r, const char* name) {
        if (!(r.lo <= r.hi)) throw ValidationError(std::string("augmentation range '") + name + "' is empty");
    };
    check(rotation_degrees, "rotation_degrees");
    check(brightness_factor, "brightness_factor");
    check(zoom_factor, "zoom_factor");
    if (rotation_degrees.lo < 0.0) throw ValidationError("rotation_degrees is a magnitude range and must be >= 0");
    if (brightness_factor.lo < 0.0 || zoom_factor.lo <= 0.0)
        throw ValidationError("brightness and zoom factors must be positive");
    if (!(shift_fraction >= 0.0 && shift_fraction <= 0.5)) throw ValidationError("shift_fraction must lie in [0, 0.5]");
}

namespace {

double draw(const Range& r, std::mt19937_64& rng) {
    return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

float bilinear_or_zero(const Image& img, double y, double x) {
    if (y < -0.5 || x < -0.5 || y > img.rows - 0.5 || x > img.cols - 0.5) return 0.0f;
    y = std::clamp(y, 0.0, img.rows - 1.0);
    x = std::clamp(x, 0.0, img.cols - 1.0);
    const int r0 = static_cast<int>(std::floor(y)), c0 = static_cast<int>(std::floor(x));
    const int r1 = std::min(r0 + 1, img.rows - 1), c1 = std::min(c0 + 1, img.cols - 1);
    const double wy = y - r0, wx = x - c0;
    const double top = img.at(r0, c0) * (1 - wx) + img.at(r0, c1) * wx;
    const double bot = img.at(r1, c0) * (1 - wx) + img.at(r1, c1) * wx;
    return static_cast<float>(top * (1 - wy) + bot * wy);
}

Image rotate(const Image& img, double degrees) {
    if (degrees == 0.0) return img;
    const double a = degrees * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cy = (img.rows - 1) / 2.0, cx = (img.cols - 1) / 2.0;
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            // inverse map: rotate the output coordinate back by -a
            const double dy = r - cy, dx = c - cx;
            const double sx = ca * dx - sa * dy + cx;
            const double sy = sa * dx + ca * dy + cy;
            out.at(r, c) = bilinear_or_zero(img, sy, sx);
        }
    return out;
}

Image zoom(const Image& img, double factor) {
    if (factor == 1.0) return img;
    const double cy = (img.rows - 1) / 2.0, cx = (img.cols - 1) / 2.0;
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            out.at(r, c) = bilinear_or_zero(img, cy + (r - cy) / factor, cx + (c - cx) / factor);
    return out;
}

}  // namespace

AugmentParams sample_augment(const AugmentConfig& config, int rows, int cols, std::mt19937_64& rng) {
    AugmentParams p;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double magnitude = draw(config.rotation_degrees, rng);
    p.rotation_degrees = unit(rng) < 0.5 ? -magnitude : magnitude;
    p.flip = config.horizontal_flip && unit(rng) < 0.5;
    p.brightness = draw(config.brightness_factor, rng);
    const Range shift{-config.shift_fraction, config.shift_fraction};
    p.shift_rows = static_cast<int>(std::lround(draw(shift, rng) * rows));
    p.shift_cols = static_cast<int>(std::lround(draw(shift, rng) * cols));
    p.zoom = draw(config.zoom_factor, rng);
    return p;
}

Image apply_augment(const Image& image, const AugmentParams& p) {
    Image out = rotate(image, p.rotation_degrees);
    if (p.flip)
        for (int r = 0; r < out.rows; ++r) {
            auto row = out.px.begin() + static_cast<std::ptrdiff_t>(r) * out.cols;
            std::reverse(row, row + out.cols);
        }
    if (p.brightness != 1.0)
        for (float& v : out.px) v = static_cast<float>(std::clamp(v * p.brightness, 0.0, 255.0));
    if (p.shift_rows != 0 || p.shift_cols != 0) {
        Image shifted(out.rows, out.cols, 0.0f);
        for (int r = 0; r < out.rows; ++r) {
            const int sr = r - p.shift_rows;
            if (sr < 0 || sr >= out.rows) continue;
            for (int c = 0; c < out.cols; ++c) {
                const int sc = c - p.shift_cols;
                if (sc >= 0 && sc < out.cols) shifted.at(r, c) = out.at(sr, sc);
            }
        }
        out = std::move(shifted);
    }
    return zoom(out, p.zoom);
}

Image augment(const Image& image, const AugmentConfig& config, std::mt19937_64& rng) {
    if (!config.enabled) return image;
    return apply_augment(image, sample_augment(config, image.rows, image.cols, rng));
}

}  // namespace octroi::nn
