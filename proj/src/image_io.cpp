#include "rinr/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "rinr/error.hpp"

namespace rinr::io {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

ImageBuffer load_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw FormatError(name + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError(name + ": " + img.message);
  }
  return ImageBuffer::from_u8(static_cast<int>(img.height), static_cast<int>(img.width), rgb);
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

ImageBuffer load_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  std::vector<std::uint8_t> rgb;
  int h = 0, w = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError(name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = static_cast<int>(cinfo.output_height);
  w = static_cast<int>(cinfo.output_width);
  rgb.resize(static_cast<std::size_t>(h) * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return ImageBuffer::from_u8(h, w, rgb);
}

std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Uncompressed 24/32-bit BMP (BI_RGB, or BI_BITFIELDS with standard masks).
ImageBuffer load_bmp(const std::vector<unsigned char>& b, const std::string& name) {
  if (b.size() < 54) throw FormatError(name + ": truncated BMP header");
  const std::uint32_t data_off = le32(&b[10]);
  const auto w = static_cast<std::int32_t>(le32(&b[18]));
  const auto raw_h = static_cast<std::int32_t>(le32(&b[22]));
  const int bpp = b[28] | (b[29] << 8);
  const std::uint32_t compression = le32(&b[30]);
  if ((bpp != 24 && bpp != 32) || (compression != 0 && compression != 3))
    throw FormatError(name + ": only uncompressed 24/32-bit BMP is supported");
  if (w <= 0 || raw_h == 0) throw FormatError(name + ": bad BMP dimensions");
  const bool top_down = raw_h < 0;
  const int h = top_down ? -raw_h : raw_h;
  const std::size_t stride = (static_cast<std::size_t>(w) * (bpp / 8) + 3) & ~std::size_t{3};
  if (data_off + stride * h > b.size()) throw FormatError(name + ": truncated BMP pixel data");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int r = 0; r < h; ++r) {
    const unsigned char* row = &b[data_off + stride * (top_down ? r : h - 1 - r)];
    for (int c = 0; c < w; ++c) {
      const unsigned char* px = row + static_cast<std::size_t>(c) * (bpp / 8);
      auto* o = &rgb[(static_cast<std::size_t>(r) * w + c) * 3];
      o[0] = px[2];
      o[1] = px[1];
      o[2] = px[0];
    }
  }
  return ImageBuffer::from_u8(h, w, rgb);
}

// Binary PPM (P6) with maxval 255.
ImageBuffer load_ppm(const std::vector<unsigned char>& b, const std::string& name) {
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      if (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    long v = 0;
    const std::size_t start = pos;
    while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
    if (pos == start || v > 1 << 20) throw FormatError(name + ": bad PPM header");
    return static_cast<int>(v);
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw FormatError(name + ": only 8-bit PPM is supported");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (pos + n > b.size()) throw FormatError(name + ": truncated PPM data");
  return ImageBuffer::from_u8(h, w, std::span(b.data() + pos, n));
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  static constexpr std::array<unsigned char, 8> png_sig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(png_sig.begin(), png_sig.end(), bytes.begin())) return load_png(bytes, name);
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) return load_jpeg(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return load_bmp(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return load_ppm(bytes, name);
  throw FormatError(name + ": unrecognized image format");
}

void save_png(const ImageBuffer& image, const std::filesystem::path& path) {
  const auto rgb = image.to_u8();
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw IoError("writing " + path.string() + ": " + img.message);
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm";
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rinr::io
