#include "rinr/archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include "rinr/compressor.hpp"
#include "rinr/error.hpp"

namespace rinr {

namespace {

constexpr char kMagic[4] = {'R', 'I', 'N', 'R'};
constexpr std::size_t kFixedHeader = 4 + 2 + 4;
constexpr std::size_t kIndexEntry = 8 + 4;
constexpr std::uint8_t kFlagSparse = 0x01;

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename U>
  void put(U v) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void put_i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename U>
  U get() {
    static_assert(std::is_unsigned_v<U>);
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::int32_t get_i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("record truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; records are far below 4 GiB but chunk anyway.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    c = crc32(c, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

bool is_quant_tag(StorageTag t) { return t == StorageTag::affine8 || t == StorageTag::affine16; }

// Code that dequantizes to exactly 0, if the code book has one.
std::optional<std::uint16_t> zero_code(const LayerQuant& q, QuantMode mode) {
  const std::int64_t levels = (std::int64_t{1} << quant_bits(mode)) - 1;
  if (q.zero_point >= 0 && q.zero_point <= levels) {
    const auto c = static_cast<std::uint16_t>(q.zero_point);
    if (dequantize_code(q, c) == 0.0f) return c;
  }
  return std::nullopt;
}

}  // namespace

std::uint16_t float_to_half(float v) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(v);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t exp = (x >> 23) & 0xffu;
  std::uint32_t mant = x & 0x7fffffu;
  if (exp == 0xff) return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1f) return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (e <= 0) {
    if (e < -10) return sign;
    mant |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t half = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t mid = 1u << (shift - 1);
    if (rem > mid || (rem == mid && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // may carry into the exponent
  return static_cast<std::uint16_t>(sign | half);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      bits = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3ffu) << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

std::ptrdiff_t DatasetArchive::find(const std::string& id) const {
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].id == id) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

void DatasetArchive::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.size() > 0xffff) throw InvalidInput("record id longer than 65535 bytes");
    for (std::size_t j = 0; j < i; ++j)
      if (records[j].id == r.id) throw InvalidInput("duplicate record id '" + r.id + "'");
    r.model.validate();
  }
}

std::size_t header_size(std::size_t count) { return kFixedHeader + kIndexEntry * count; }

std::vector<std::uint8_t> encode_record(const ArchiveRecord& record, const WriteOptions& opts) {
  const InrModel& m = record.model;
  m.validate();
  if (record.id.size() > 0xffff) throw InvalidInput("record id longer than 65535 bytes");
  if (m.layers.size() > 0xff) throw InvalidInput("at most 255 layers per model");
  for (int d : m.arch.dims)
    if (d > 0xffff) throw InvalidInput("layer width above 65535");
  if (m.source_h < 0 || m.source_w < 0) throw InvalidInput("negative source size");

  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put(static_cast<std::uint16_t>(record.id.size()));
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(record.id.data()), record.id.size()});
  w.put(static_cast<std::uint32_t>(m.source_h));
  w.put(static_cast<std::uint32_t>(m.source_w));
  w.put_f64(m.arch.omega);
  w.put(static_cast<std::uint8_t>(m.layers.size()));
  for (int d : m.arch.dims) w.put(static_cast<std::uint16_t>(d));
  w.put(static_cast<std::uint8_t>(m.quant.mode));

  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    const bool quantized = m.quant.layer_quantized(l);
    StorageTag tag = opts.float_storage == FloatStorage::f16 ? StorageTag::f16_dense : StorageTag::f32_dense;
    if (quantized) tag = m.quant.mode == QuantMode::affine8 ? StorageTag::affine8 : StorageTag::affine16;
    const LayerQuant* q = quantized ? &m.quant.layers[l] : nullptr;

    // Entries whose stored value is exactly zero are implicit; masked entries always are.
    const std::size_t n = L.w.size();
    std::vector<std::uint8_t> nonzero(n);
    std::vector<std::uint16_t> half(tag == StorageTag::f16_dense ? n : 0);
    std::size_t zeros = 0;
    bool masked = false;
    for (std::size_t i = 0; i < n; ++i) {
      bool nz = m.mask[l][i] != 0;
      masked |= !nz;
      if (nz) {
        if (tag == StorageTag::f16_dense) {
          half[i] = float_to_half(L.w[i]);
          nz = half_to_float(half[i]) != 0.0f;
        } else if (q) {
          nz = dequantize_code(*q, q->codes[i]) != 0.0f;
        } else {
          nz = L.w[i] != 0.0f;
        }
      }
      nonzero[i] = nz ? 1 : 0;
      zeros += nz ? 0 : 1;
    }
    const auto zc = q ? zero_code(*q, m.quant.mode) : std::optional<std::uint16_t>{0};
    const bool sparse = static_cast<double>(zeros) > kSparseThreshold * static_cast<double>(n) ||
                        (masked && !zc);

    w.put(static_cast<std::uint8_t>(tag));
    w.put(static_cast<std::uint8_t>(sparse ? kFlagSparse : 0));
    if (q) {
      w.put_f32(q->scale);
      w.put_i32(q->zero_point);
      w.put_f32(q->offset);
    }
    if (sparse) {
      std::vector<std::uint8_t> bits((n + 7) / 8, 0);
      for (std::size_t i = 0; i < n; ++i)
        if (nonzero[i]) bits[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
      w.put_bytes(bits);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (sparse && !nonzero[i]) continue;
      switch (tag) {
        case StorageTag::f32_dense: w.put_f32(nonzero[i] ? L.w[i] : 0.0f); break;
        case StorageTag::f16_dense: w.put(static_cast<std::uint16_t>(nonzero[i] ? half[i] : 0)); break;
        case StorageTag::affine8: w.put(static_cast<std::uint8_t>(nonzero[i] ? q->codes[i] : *zc)); break;
        case StorageTag::affine16: w.put(static_cast<std::uint16_t>(nonzero[i] ? q->codes[i] : *zc)); break;
      }
    }
    for (float b : L.b) w.put_f32(b);
  }
  return out;
}

ArchiveRecord decode_record(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ArchiveRecord rec;
  const auto id_len = r.get<std::uint16_t>();
  const auto id = r.get_bytes(id_len);
  rec.id.assign(reinterpret_cast<const char*>(id.data()), id.size());
  InrModel& m = rec.model;
  const auto sh = r.get<std::uint32_t>();
  const auto sw = r.get<std::uint32_t>();
  if (sh > 0x7fffffffu || sw > 0x7fffffffu) throw FormatError("source size out of range");
  m.source_h = static_cast<int>(sh);
  m.source_w = static_cast<int>(sw);
  m.arch.omega = r.get_f64();
  const auto nl = r.get<std::uint8_t>();
  if (nl == 0) throw FormatError("record has no layers");
  for (std::size_t i = 0; i <= nl; ++i) m.arch.dims.push_back(r.get<std::uint16_t>());
  try {
    m.arch.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("bad architecture: ") + e.what());
  }
  const auto mode_byte = r.get<std::uint8_t>();
  if (mode_byte > 2) throw FormatError("unknown quantization mode");
  m.quant.mode = static_cast<QuantMode>(mode_byte);
  if (m.quant.mode != QuantMode::none) m.quant.layers.assign(nl, LayerQuant{});

  for (std::size_t l = 0; l < nl; ++l) {
    LayerWeights<float> L;
    L.in = m.arch.dims[l];
    L.out = m.arch.dims[l + 1];
    const std::size_t n = static_cast<std::size_t>(L.in) * L.out;
    L.w.assign(n, 0.0f);
    std::vector<std::uint8_t> keep(n, 1);

    const auto tag_byte = r.get<std::uint8_t>();
    if (tag_byte > 3) throw FormatError("unknown storage tag");
    const auto tag = static_cast<StorageTag>(tag_byte);
    const auto flags = r.get<std::uint8_t>();
    if (flags & ~kFlagSparse) throw FormatError("unknown layer flags");
    const bool sparse = flags & kFlagSparse;

    LayerQuant* q = nullptr;
    if (is_quant_tag(tag)) {
      const QuantMode want = tag == StorageTag::affine8 ? QuantMode::affine8 : QuantMode::affine16;
      if (m.quant.mode != want) throw FormatError("layer tag disagrees with model quantization mode");
      if (l == 0 || l + 1 == nl) throw FormatError("first/last layer stored quantized");
      q = &m.quant.layers[l];
      q->quantized = true;
      q->scale = r.get_f32();
      q->zero_point = r.get_i32();
      q->offset = r.get_f32();
      q->codes.assign(n, 0);
    }
    if (sparse) {
      const auto bits = r.get_bytes((n + 7) / 8);
      for (std::size_t i = 0; i < n; ++i) keep[i] = (bits[i >> 3] >> (i & 7)) & 1u;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      float v = 0.0f;
      switch (tag) {
        case StorageTag::f32_dense: v = r.get_f32(); break;
        case StorageTag::f16_dense: v = half_to_float(r.get<std::uint16_t>()); break;
        case StorageTag::affine8: q->codes[i] = r.get<std::uint8_t>(); v = dequantize_code(*q, q->codes[i]); break;
        case StorageTag::affine16: q->codes[i] = r.get<std::uint16_t>(); v = dequantize_code(*q, q->codes[i]); break;
      }
      if (!sparse && v == 0.0f) {
        keep[i] = 0;
        if (q) q->codes[i] = 0;
        continue;
      }
      L.w[i] = v;
    }
    L.b.resize(L.out);
    for (auto& b : L.b) b = r.get_f32();
    m.layers.push_back(std::move(L));
    m.mask.push_back(std::move(keep));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after record");
  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(e.what());
  }
  return rec;
}

std::vector<std::uint8_t> serialize(const DatasetArchive& archive, const WriteOptions& opts) {
  archive.validate();
  if (archive.records.size() > 0xffffffffu) throw InvalidInput("too many records");
  std::vector<std::vector<std::uint8_t>> bodies;
  bodies.reserve(archive.records.size());
  for (const auto& rec : archive.records) {
    auto b = encode_record(rec, opts);
    const auto crc = crc32_of(b);
    ByteWriter(b).put(crc);
    if (b.size() > 0xffffffffu) throw InvalidInput("record too large");
    bodies.push_back(std::move(b));
  }
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  w.put(archive.version);
  w.put(static_cast<std::uint32_t>(bodies.size()));
  std::uint64_t offset = header_size(bodies.size());
  for (const auto& b : bodies) {
    w.put(offset);
    w.put(static_cast<std::uint32_t>(b.size()));
    offset += b.size();
  }
  for (const auto& b : bodies) w.put_bytes(b);
  return out;
}

namespace {

ArchiveIndex parse_index(std::span<const std::uint8_t> head, std::size_t total_size) {
  if (head.size() < kFixedHeader) throw IntegrityError("archive truncated in header");
  if (std::memcmp(head.data(), kMagic, 4) != 0) throw IntegrityError("bad magic, not a .rinr archive");
  ByteReader r(head.subspan(4));
  ArchiveIndex idx;
  idx.version = r.get<std::uint16_t>();
  if (idx.version != kArchiveVersion)
    throw FormatError("unsupported archive version " + std::to_string(idx.version));
  const auto count = r.get<std::uint32_t>();
  idx.header_bytes = header_size(count);
  if (idx.header_bytes > total_size) throw IntegrityError("archive truncated in index");
  if (head.size() < idx.header_bytes) throw IntegrityError("archive truncated in index");
  std::uint64_t expect = idx.header_bytes;
  for (std::uint32_t k = 0; k < count; ++k) {
    IndexEntry e;
    e.offset = r.get<std::uint64_t>();
    e.length = r.get<std::uint32_t>();
    if (e.offset != expect || e.length < 4)
      throw IntegrityError("index entry " + std::to_string(k) + " is inconsistent", k);
    if (e.offset + e.length > total_size)
      throw IntegrityError("archive truncated in record " + std::to_string(k), k);
    expect += e.length;
    idx.entries.push_back(e);
  }
  if (expect != total_size) throw IntegrityError("trailing bytes after last record");
  return idx;
}

ArchiveRecord verify_and_decode(std::span<const std::uint8_t> bytes, std::size_t k) {
  const auto body = bytes.first(bytes.size() - 4);
  const auto stored = ByteReader(bytes.last(4)).get<std::uint32_t>();
  if (crc32_of(body) != stored)
    throw IntegrityError("CRC mismatch in record " + std::to_string(k), static_cast<std::ptrdiff_t>(k));
  try {
    return decode_record(body);
  } catch (const IntegrityError&) {
    throw;
  } catch (const FormatError& e) {
    throw IntegrityError("record " + std::to_string(k) + ": " + e.what(), static_cast<std::ptrdiff_t>(k));
  }
}

}  // namespace

DatasetArchive deserialize(std::span<const std::uint8_t> bytes) {
  const auto idx = parse_index(bytes, bytes.size());
  DatasetArchive a;
  a.version = idx.version;
  for (std::size_t k = 0; k < idx.entries.size(); ++k) {
    const auto& e = idx.entries[k];
    a.records.push_back(verify_and_decode(bytes.subspan(e.offset, e.length), k));
  }
  try {
    a.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(e.what());
  }
  return a;
}

std::size_t write(const DatasetArchive& archive, std::ostream& sink, const WriteOptions& opts) {
  const auto bytes = serialize(archive, opts);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw IoError("failed writing archive");
  return bytes.size();
}

std::size_t write_file(const DatasetArchive& archive, const std::filesystem::path& path,
                       const WriteOptions& opts) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const auto n = write(archive, f, opts);
  f.close();
  if (!f) throw IoError("failed closing " + path.string());
  return n;
}

DatasetArchive read(std::istream& source) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
  if (source.bad()) throw IoError("failed reading archive");
  return deserialize(bytes);
}

DatasetArchive read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return read(f);
}

ArchiveIndex read_index(std::istream& source) {
  source.seekg(0, std::ios::end);
  const auto end = source.tellg();
  if (end < 0) throw IoError("archive stream is not seekable");
  const auto total = static_cast<std::size_t>(end);
  source.seekg(0);
  std::vector<std::uint8_t> fixed(std::min(total, kFixedHeader));
  source.read(reinterpret_cast<char*>(fixed.data()), static_cast<std::streamsize>(fixed.size()));
  if (fixed.size() < kFixedHeader) throw IntegrityError("archive truncated in header");
  const std::uint32_t count = ByteReader(std::span(fixed).subspan(6)).get<std::uint32_t>();
  const std::size_t need = std::min(total, header_size(count));
  std::vector<std::uint8_t> head(need);
  source.seekg(0);
  source.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(need));
  if (!source) throw IoError("failed reading archive index");
  return parse_index(head, total);
}

ArchiveRecord read_record(std::istream& source, const ArchiveIndex& index, std::size_t k) {
  if (k >= index.entries.size()) throw InvalidInput("record index out of range");
  const auto& e = index.entries[k];
  std::vector<std::uint8_t> bytes(e.length);
  source.clear();
  source.seekg(static_cast<std::streamoff>(e.offset));
  source.read(reinterpret_cast<char*>(bytes.data()), e.length);
  if (!source) throw IntegrityError("archive truncated in record " + std::to_string(k), static_cast<std::ptrdiff_t>(k));
  return verify_and_decode(bytes, k);
}

double ArchiveStats::ratio_vs_dense() const {
  return dense_f32_bytes ? static_cast<double>(total_bytes) / static_cast<double>(dense_f32_bytes) : 0.0;
}

double ArchiveStats::ratio_vs_raw() const {
  return raw_bytes ? static_cast<double>(total_bytes) / static_cast<double>(raw_bytes) : 0.0;
}

namespace {

// Record bytes (incl. CRC) of an unpruned, unquantized f32 model.
std::size_t dense_record_size(std::size_t id_len, const Architecture& arch) {
  std::size_t n = 2 + id_len + 4 + 4 + 8 + 1 + 2 * arch.dims.size() + 1;
  for (std::size_t l = 0; l < arch.num_layers(); ++l)
    n += 2 + 4 * static_cast<std::size_t>(arch.dims[l]) * arch.dims[l + 1] + 4 * arch.dims[l + 1];
  return n + 4;
}

}  // namespace

ArchiveStats stats(const DatasetArchive& archive, const WriteOptions& opts) {
  ArchiveStats s;
  s.header_bytes = header_size(archive.records.size());
  s.total_bytes = s.dense_f32_bytes = s.header_bytes;
  double ratio_sum = 0.0;
  for (const auto& rec : archive.records) {
    RecordStats r;
    r.id = rec.id;
    r.bytes = encode_record(rec, opts).size() + 4;
    r.dense_bytes = dense_record_size(rec.id.size(), rec.model.arch);
    r.raw_bytes = static_cast<std::size_t>(rec.model.source_h) * rec.model.source_w * 3;
    r.prune_ratio = rec.model.prune_ratio();
    r.quant = rec.model.quant.mode;
    s.total_bytes += r.bytes;
    s.dense_f32_bytes += r.dense_bytes;
    s.raw_bytes += r.raw_bytes;
    ratio_sum += r.prune_ratio;
    s.records.push_back(std::move(r));
  }
  if (!archive.records.empty()) s.mean_prune_ratio = ratio_sum / static_cast<double>(archive.records.size());
  return s;
}

std::size_t jpeg_directory_bytes(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::size_t total = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") total += static_cast<std::size_t>(e.file_size());
  }
  return total;
}

}  // namespace rinr
