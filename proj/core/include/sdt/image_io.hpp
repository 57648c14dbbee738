#pragma once

#include <filesystem>

#include "sdt/tensor.hpp"

namespace sdt {

/// 8-bit grayscale PNG; any nonzero pixel reads as foreground.
Mask read_mask_png(const std::filesystem::path& path);
/// Writes 0 for background and 255 for foreground.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

/// Writes a 3-channel image clamped to [0, 1] as 8-bit RGB.
void write_rgb_png(const std::filesystem::path& path, const Image& image);
Image read_rgb_png(const std::filesystem::path& path);

}  // namespace sdt
