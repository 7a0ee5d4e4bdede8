#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rinr {

/// H x W x 3 raster of normalized channel values, row-major, channels interleaved.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  ImageBuffer() = default;
  ImageBuffer(int height, int width, float fill = 0.0f);

  /// 8-bit samples divided by 255.
  static ImageBuffer from_u8(int height, int width, std::span<const std::uint8_t> rgb);

  /// Clamps to [0, 1] and maps round-half-away-from-zero(v * 255).
  std::vector<std::uint8_t> to_u8() const;

  /// Same image after an 8-bit round trip.
  ImageBuffer quantized_u8() const;

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  float& at(int r, int c, int ch) { return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  float at(int r, int c, int ch) const {
    return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }

  bool operator==(const ImageBuffer&) const = default;
};

/// Maps one normalized value to 8 bits, clamping first.
std::uint8_t to_u8(float v);

}  // namespace rinr
