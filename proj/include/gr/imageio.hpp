#pragma once

#include <filesystem>
#include <string>

#include "gr/image.hpp"

namespace gr::io {

// Format is chosen by file extension: .png, .pgm (case-insensitive).
// PNG covers 8-bit gray, gray+alpha, palette, RGB and RGBA inputs; alpha is
// dropped and palette/RGB are kept as-is for read_rgb or converted via luma
// for read_gray. Interlaced PNGs are rejected.

GrayImage read_gray(const std::filesystem::path& file);
RgbImage read_rgb(const std::filesystem::path& file);

void write_gray(const std::filesystem::path& file, const GrayImage& img);
void write_rgb(const std::filesystem::path& file, const RgbImage& img);

// Masks are stored as 8-bit gray with values {0,255}.
void write_mask(const std::filesystem::path& file, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& file);

bool is_image_file(const std::filesystem::path& file);

}  // namespace gr::io
