#pragma once

#include <filesystem>

#include "mek/image.hpp"

namespace mek {

/// Loads an 8-bit grayscale, RGB or RGBA PNG/JPEG. Colour input is reduced
/// with luma weights 0.299 R + 0.587 G + 0.114 B.
GrayImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit single-channel PNG, rounding half-up.
void write_png(const GrayImage& img, const std::filesystem::path& path);
void write_png(const EdgeImage& img, const std::filesystem::path& path);

/// True for extensions read_image understands (.png, .jpg, .jpeg; any case).
bool is_image_file(const std::filesystem::path& path);

}  // namespace mek
