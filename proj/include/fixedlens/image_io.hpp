#pragma once

#include "fixedlens/image.hpp"

#include <filesystem>

namespace fixedlens {

/// Reads an 8- or 16-bit gray / gray+alpha / RGB / RGBA PNG or TIFF. Samples
/// are scaled by 1/255 or 1/65535; an alpha channel becomes the validity mask
/// (alpha >= half scale is valid). Raises IoError when the file cannot be read
/// (missing, truncated) and FormatError for unsupported layouts.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes PNG or TIFF (chosen by extension) at 8 or 16 bits per sample.
/// Samples are clamped to [0,1] and rounded. When the image carries a
/// validity mask an alpha channel is written (0 = invalid, max = valid).
void save_image(const ImageBuffer& img, const std::filesystem::path& path, int bit_depth = 16);

}  // namespace fixedlens
