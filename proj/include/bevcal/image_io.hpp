#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevcal/raster.hpp"

namespace bevcal {

// 8-bit PNG, 1-4 channels. Palette and 16-bit inputs are expanded/stripped to 8-bit.
RasterImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RasterImage& img);

// Portable float map, 1 (Pf) or 3 (PF) channels, rows stored bottom-up.
RasterImage decode_pfm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pfm(const RasterImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Dispatches on the extension (.png or .pfm).
RasterImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const RasterImage& img);

}  // namespace bevcal
