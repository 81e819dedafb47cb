#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "octroi/core.hpp"

namespace octroi {

/// Intensities are rounded and clamped to [0, 255].
std::vector<std::uint8_t> quantize(const Image& image);

std::string encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& path);

/// 8-bit grayscale only; anything else is rejected.
Image read_png(const std::filesystem::path& path);

}  // namespace octroi
