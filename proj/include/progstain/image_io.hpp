#pragma once

#include <cstdint>
#include <filesystem>

#include "progstain/image.hpp"

namespace progstain {

/// Reads PNG (8 or 16 bit) or PPM/PGM (plain P2/P3 and binary P5/P6),
/// chosen by file signature. Intensities are rescaled from the file's bit
/// depth into [0,1]. Only 1- and 3-channel rasters are accepted.
Image load_image(const std::filesystem::path& path);

/// Writes an 8- or 16-bit raster. The format follows the extension:
/// `.png`, or `.pgm`/`.ppm` (plain text). Values are rounded to the
/// nearest code, so a round trip is exact to 1/255 (or 1/65535).
void save_image(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

/// Nearest 8-bit code for an intensity in [0,1].
unsigned char quantize_8bit(double v) noexcept;
std::uint16_t quantize_16bit(double v) noexcept;

} // namespace progstain
