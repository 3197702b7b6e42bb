#pragma once

#include <filesystem>

#include "neid/image.hpp"

namespace neid {

/// Decodes an 8-bit PNG. RGB is taken as-is, RGBA drops alpha, grayscale
/// (with or without alpha) is promoted to RGB. Bytes map to [0, 1] by v/255.
/// Throws MissingFile or UnsupportedFormat.
Image load_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Quantization is round(v * 255), half away from
/// zero, clamped to [0, 255]. Throws IoError.
void save_png(const Image& img, const std::filesystem::path& path);

/// The PNG quantization round trip applied in memory: round to 8 bits, map
/// back by v/255.
Image quantize8(const Image& img);

}  // namespace neid
