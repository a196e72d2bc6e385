#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "oasis/core/types.hpp"

namespace oasis {

using Palette = std::vector<std::array<uint8_t, 3>>;

// Standard 256-entry bit-interleaved colormap (index 0 is black/background).
const Palette& davis_palette();

// Decodes PNG or JPEG (by magic bytes) into [3,H,W] floats in [0,1].
Tensor read_image_rgb(const std::filesystem::path& path);

// 8-bit RGB PNG from [3,H,W] floats in [0,1].
void write_image_rgb(const std::filesystem::path& path, const Tensor& image);

// 8-bit grayscale PNG from [1,H,W] floats in [0,1].
void write_gray_png(const std::filesystem::path& path, const Tensor& image);

// Annotations must be indexed-palette PNGs; palette indices are the labels.
IdMask read_palette_mask(const std::filesystem::path& path);

void write_palette_mask(const std::filesystem::path& path, const IdMask& mask,
                        const Palette& palette = davis_palette());

}  // namespace oasis
