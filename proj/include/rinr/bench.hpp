#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rinr/archive.hpp"
#include "rinr/image.hpp"

namespace rinr {

struct BenchOptions {
  /// Images decoded together; each batch is spread over `jobs` threads.
  int batch = 1;
  int jobs = 1;
  /// Output size; 0 keeps each record's source size.
  int height = 0;
  int width = 0;
};

struct BenchReport {
  int batch = 0;
  int jobs = 0;
  std::size_t images = 0;
  std::size_t pixels = 0;
  /// Stage seconds. Decode stages are summed over worker threads.
  double load_s = 0.0;
  double dequantize_s = 0.0;
  double forward_s = 0.0;
  double clamp_convert_s = 0.0;
  /// Wall time of the decode loop (load excluded).
  double decode_wall_s = 0.0;
  double images_per_s = 0.0;
  double pixels_per_s = 0.0;
  /// FNV-1a over every emitted 8-bit sample, in record order.
  std::uint64_t output_digest = 0;
};

/// Decodes every record of an in-memory archive in batches.
BenchReport bench(const DatasetArchive& archive, const BenchOptions& opts);

/// Loads the archive once (timed as the load stage), then benches it.
BenchReport bench_file(const std::filesystem::path& path, const BenchOptions& opts);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace rinr
