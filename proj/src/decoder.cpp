#include "rinr/decoder.hpp"

#include <chrono>
#include <string>

#include "rinr/compressor.hpp"
#include "rinr/error.hpp"
#include "rinr/parallel.hpp"

namespace rinr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

ImageBuffer decode(const InrModel& model, const DecodeOptions& opts, DecodeTimings* timings) {
  const int h = opts.height > 0 ? opts.height : model.source_h;
  const int w = opts.width > 0 ? opts.width : model.source_w;
  if (h < 1 || w < 1) throw InvalidInput("decode size must be >= 1 (model has no source size)");
  if (opts.tile == 0) throw InvalidInput("decode tile must be > 0");

  auto t0 = Clock::now();
  InrModel plain;
  const InrModel* net = &model;
  if (model.quantized()) {
    plain = dequantize(model);
    net = &plain;
  } else {
    model.validate();
  }
  if (timings) timings->dequantize += seconds_since(t0);

  t0 = Clock::now();
  const auto grid = CoordinateGrid::raster(h, w);
  std::vector<float> raw(grid.size() * 3);
  const std::size_t tiles = (grid.size() + opts.tile - 1) / opts.tile;
  parallel_for(tiles, opts.jobs, [&](std::size_t t) {
    const std::size_t begin = t * opts.tile;
    const std::size_t end = std::min(grid.size(), begin + opts.tile);
    forward_range<float>(*net, grid, begin, end, std::span<float>(raw).subspan(3 * begin, 3 * (end - begin)));
  });
  if (timings) timings->forward += seconds_since(t0);

  t0 = Clock::now();
  ImageBuffer img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = raw[i];
    img.pixels[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : (v == v ? v : 0.0f));
  }
  if (timings) timings->clamp += seconds_since(t0);
  return img;
}

std::vector<ImageBuffer> decode_batch(std::span<const InrModel> models, int height, int width, int jobs) {
  if (models.empty()) throw InvalidInput("decode_batch needs at least one model");
  std::vector<ImageBuffer> out(models.size());
  parallel_for(models.size(), jobs, [&](std::size_t i) {
    try {
      out[i] = decode(models[i], DecodeOptions{height, width});
    } catch (const Error& e) {
      throw FormatError("model " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace rinr
