#pragma once

// The .rinr dataset container. Byte layout is documented in docs/FORMAT.md.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rinr/inr_net.hpp"

namespace rinr {

inline constexpr std::uint16_t kArchiveVersion = 1;

struct ArchiveRecord {
  std::string id;
  InrModel model;

  bool operator==(const ArchiveRecord&) const = default;
};

struct DatasetArchive {
  std::uint16_t version = kArchiveVersion;
  std::vector<ArchiveRecord> records;

  /// Index of the record called `id`, or -1.
  std::ptrdiff_t find(const std::string& id) const;
  /// Throws InvalidInput on duplicate or over-long ids, FormatError on bad models.
  void validate() const;

  bool operator==(const DatasetArchive&) const = default;
};

/// How full-precision (unquantized) layers are stored.
enum class FloatStorage { f32, f16 };

struct WriteOptions {
  FloatStorage float_storage = FloatStorage::f32;
};

/// Per-layer storage tags.
enum class StorageTag : std::uint8_t { f32_dense = 0, f16_dense = 1, affine8 = 2, affine16 = 3 };

/// A layer switches to the sparse block (kept-bitset + packed values) when
/// more than this fraction of its weights decode to exactly zero.
inline constexpr double kSparseThreshold = 0.125;

/// Serialized bytes of one record, without the trailing CRC.
std::vector<std::uint8_t> encode_record(const ArchiveRecord& record, const WriteOptions& opts = {});
/// Inverse of encode_record. Throws FormatError on malformed bytes.
ArchiveRecord decode_record(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize(const DatasetArchive& archive, const WriteOptions& opts = {});
/// Throws IntegrityError (bad magic, truncation, CRC mismatch) or FormatError.
DatasetArchive deserialize(std::span<const std::uint8_t> bytes);

/// Returns bytes written. Throws IoError.
std::size_t write(const DatasetArchive& archive, std::ostream& sink, const WriteOptions& opts = {});
std::size_t write_file(const DatasetArchive& archive, const std::filesystem::path& path,
                       const WriteOptions& opts = {});
DatasetArchive read(std::istream& source);
DatasetArchive read_file(const std::filesystem::path& path);

struct IndexEntry {
  std::uint64_t offset = 0;
  std::uint32_t length = 0;  // record bytes including its CRC
};

/// Header fields plus the offset table, read without touching record bytes.
struct ArchiveIndex {
  std::uint16_t version = 0;
  std::vector<IndexEntry> entries;
  std::size_t header_bytes = 0;
};

ArchiveIndex read_index(std::istream& source);
/// Seeks to and verifies record k only.
ArchiveRecord read_record(std::istream& source, const ArchiveIndex& index, std::size_t k);

/// Bytes of the fixed file header + index for `count` records.
std::size_t header_size(std::size_t count);

/// IEEE 754 binary16 conversion, round-to-nearest-even.
std::uint16_t float_to_half(float v);
float half_to_float(std::uint16_t h);

struct RecordStats {
  std::string id;
  std::size_t bytes = 0;        // record incl. CRC
  std::size_t dense_bytes = 0;  // same record written as dense f32, unquantized
  std::size_t raw_bytes = 0;    // source_h * source_w * 3
  double prune_ratio = 0.0;
  QuantMode quant = QuantMode::none;
};

struct ArchiveStats {
  std::size_t total_bytes = 0;
  std::size_t header_bytes = 0;
  std::size_t dense_f32_bytes = 0;  // whole archive with every record dense f32
  std::size_t raw_bytes = 0;
  double mean_prune_ratio = 0.0;
  std::vector<RecordStats> records;

  double ratio_vs_dense() const;
  double ratio_vs_raw() const;
};

ArchiveStats stats(const DatasetArchive& archive, const WriteOptions& opts = {});

/// Sum of regular file sizes in `dir` whose extension is .jpg/.jpeg (case-insensitive).
std::size_t jpeg_directory_bytes(const std::filesystem::path& dir);

}  // namespace rinr
