#include "rinr/bench.hpp"

#include <chrono>
#include <mutex>

#include "rinr/decoder.hpp"
#include "rinr/error.hpp"
#include "rinr/parallel.hpp"

namespace rinr {

namespace {
using Clock = std::chrono::steady_clock;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

BenchReport bench(const DatasetArchive& archive, const BenchOptions& opts) {
  if (opts.batch < 1 || opts.jobs < 1) throw InvalidInput("batch and jobs must be >= 1");
  BenchReport rep;
  rep.batch = opts.batch;
  rep.jobs = opts.jobs;
  const std::size_t n = archive.records.size();
  std::vector<std::vector<std::uint8_t>> out(n);
  std::vector<DecodeTimings> per_image(n);
  std::vector<double> convert_s(n, 0.0);

  const auto t0 = Clock::now();
  for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(opts.batch)) {
    const std::size_t count = std::min<std::size_t>(opts.batch, n - first);
    // Batches with fewer images than threads also split pixels across threads.
    const int inner = std::max(1, opts.jobs / static_cast<int>(count));
    parallel_for(count, opts.jobs, [&](std::size_t j) {
      const std::size_t i = first + j;
      DecodeOptions d{opts.height, opts.width, inner};
      const auto img = decode(archive.records[i].model, d, &per_image[i]);
      const auto c0 = Clock::now();
      out[i] = img.to_u8();
      convert_s[i] = std::chrono::duration<double>(Clock::now() - c0).count();
    });
  }
  rep.decode_wall_s = std::chrono::duration<double>(Clock::now() - t0).count();

  rep.output_digest = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    rep.dequantize_s += per_image[i].dequantize;
    rep.forward_s += per_image[i].forward;
    rep.clamp_convert_s += per_image[i].clamp + convert_s[i];
    rep.pixels += out[i].size() / 3;
    rep.output_digest = fnv1a(out[i], rep.output_digest);
  }
  rep.images = n;
  if (rep.decode_wall_s > 0.0) {
    rep.images_per_s = static_cast<double>(n) / rep.decode_wall_s;
    rep.pixels_per_s = static_cast<double>(rep.pixels) / rep.decode_wall_s;
  }
  return rep;
}

BenchReport bench_file(const std::filesystem::path& path, const BenchOptions& opts) {
  const auto t0 = Clock::now();
  const auto archive = read_file(path);
  const double load = std::chrono::duration<double>(Clock::now() - t0).count();
  auto rep = bench(archive, opts);
  rep.load_s = load;
  return rep;
}

}  // namespace rinr
