#pragma once

// Raster file I/O used at the CLI boundary: PNG, baseline JPEG, BMP and
// binary PPM in; PNG out.

#include <filesystem>
#include <string>
#include <vector>

#include "rinr/image.hpp"

namespace rinr::io {

/// Decodes an image file to normalized RGB (alpha dropped, grey expanded).
/// Format is chosen by content, not extension. Throws IoError / FormatError.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG (values clamped and rounded).
void save_png(const ImageBuffer& image, const std::filesystem::path& path);

/// True for extensions load_image understands.
bool is_image_file(const std::filesystem::path& path);

/// Image files directly inside `dir`, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace rinr::io
