#include "rinr/image.hpp"

#include <algorithm>
#include <cmath>

#include "rinr/error.hpp"

namespace rinr {

ImageBuffer::ImageBuffer(int h, int w, float fill) : height(h), width(w) {
  if (h < 1 || w < 1) throw InvalidInput("image dimensions must be >= 1");
  pixels.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

ImageBuffer ImageBuffer::from_u8(int h, int w, std::span<const std::uint8_t> rgb) {
  ImageBuffer img(h, w);
  if (rgb.size() != img.pixels.size()) throw InvalidInput("rgb sample count does not match dimensions");
  for (std::size_t i = 0; i < rgb.size(); ++i) img.pixels[i] = static_cast<float>(rgb[i]) / 255.0f;
  return img;
}

std::uint8_t to_u8(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::vector<std::uint8_t> ImageBuffer::to_u8() const {
  std::vector<std::uint8_t> out(pixels.size());
  std::transform(pixels.begin(), pixels.end(), out.begin(), [](float v) { return rinr::to_u8(v); });
  return out;
}

ImageBuffer ImageBuffer::quantized_u8() const {
  const auto bytes = to_u8();
  return from_u8(height, width, bytes);
}

}  // namespace rinr
