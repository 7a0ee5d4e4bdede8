#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rinr/image.hpp"
#include "rinr/inr_net.hpp"

namespace rinr {

/// Seconds spent per decode stage, accumulated across calls.
struct DecodeTimings {
  double dequantize = 0.0;
  double forward = 0.0;
  double clamp = 0.0;
};

struct DecodeOptions {
  /// Output size; 0 means the model's source dimension.
  int height = 0;
  int width = 0;
  /// Threads used across pixel tiles of one image.
  int jobs = 1;
  /// Pixels per tile.
  std::size_t tile = 4096;
};

/// Reconstructs the image at any resolution: builds the coordinate grid,
/// dequantizes if needed, evaluates the network and clamps to [0, 1].
/// Output is bit-identical for every `jobs` and `tile` setting.
/// Throws FormatError for a malformed model, InvalidInput for a bad size.
ImageBuffer decode(const InrModel& model, const DecodeOptions& opts = {},
                   DecodeTimings* timings = nullptr);

inline ImageBuffer decode(const InrModel& model, int height, int width) {
  return decode(model, DecodeOptions{height, width});
}

/// Decodes each model independently, `jobs` images at a time, order-preserving.
/// A failure is rethrown as FormatError naming the model index.
std::vector<ImageBuffer> decode_batch(std::span<const InrModel> models, int height, int width,
                                      int jobs = 1);

}  // namespace rinr
