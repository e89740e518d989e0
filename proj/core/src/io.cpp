// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <system_error>

#include "ppe/error.hpp"

namespace ppe {
namespace {

// libpng reports errors through longjmp; everything touched after setjmp
// lives behind these pointers so no automatic C++ object is left
// half-updated when the jump lands.
struct PngErrorSink {
  char message[256] = "malformed PNG";
};

struct PngMemoryReader {
  const std::uint8_t* data = nullptr;
  std::size_t size = 0;
  std::size_t pos = 0;
};

struct PngDecodeTarget {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  bool supported = false;
  std::vector<std::uint8_t>* pixels = nullptr;
  std::vector<png_bytep>* rows = nullptr;
};

struct PngEncodeSource {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  std::vector<png_bytep>* rows = nullptr;
  Bytes* out = nullptr;
};

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

void png_read_cb(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (reader->size - reader->pos < count) png_error(png, "truncated PNG");
  std::memcpy(out, reader->data + reader->pos, count);
  reader->pos += count;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void png_flush_cb(png_structp) {}

bool decode_rows(png_structp png, png_infop info, PngDecodeTarget* target) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  int interlace = 0;
  png_get_IHDR(png, info, &target->width, &target->height, &target->bit_depth,
               &target->color_type, &interlace, nullptr, nullptr);
  if (target->bit_depth != 8 || target->color_type != PNG_COLOR_TYPE_RGB) {
    return true;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(target->width) * 3;
  target->pixels->assign(stride * target->height, 0);
  target->rows->resize(target->height);
  for (png_uint_32 r = 0; r < target->height; ++r) {
    (*target->rows)[r] = target->pixels->data() + stride * r;
  }
  png_read_image(png, target->rows->data());
  png_read_end(png, nullptr);
  target->supported = true;
  return true;
}

bool encode_rows(png_structp png, png_infop info, PngEncodeSource* source) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, source->out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, source->width, source->height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, source->rows->data());
  png_write_end(png, nullptr);
  return true;
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

IdMap read_panoptic_png(std::span<const std::uint8_t> png) {
  if (png.size() < 8 || png_sig_cmp(png.data(), 0, 8) != 0) {
    throw FormatError("not a PNG stream");
  }
  PngErrorSink sink;
  PngMemoryReader reader{png.data(), png.size(), 0};
  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink,
                                               png_error_cb, png_warning_cb);
  if (png_ptr == nullptr) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (info == nullptr) {
    png_destroy_read_struct(&png_ptr, nullptr, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  png_set_read_fn(png_ptr, &reader, png_read_cb);

  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  PngDecodeTarget target;
  target.pixels = &pixels;
  target.rows = &rows;
  const bool ok = decode_rows(png_ptr, info, &target);
  png_destroy_read_struct(&png_ptr, &info, nullptr);
  if (!ok) throw FormatError(std::string("PNG decode failed: ") + sink.message);
  if (!target.supported) {
    throw FormatError("panoptic PNG must be 8-bit RGB (got bit depth " +
                      std::to_string(target.bit_depth) + ", color type " +
                      std::to_string(target.color_type) + ")");
  }

  const int height = static_cast<int>(target.height);
  const int width = static_cast<int>(target.width);
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(height) * width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::uint8_t* px = pixels.data() + 3 * i;
    ids[i] = static_cast<std::uint32_t>(px[0]) |
             (static_cast<std::uint32_t>(px[1]) << 8) |
             (static_cast<std::uint32_t>(px[2]) << 16);
  }
  return IdMap(height, width, std::move(ids));
}

Bytes write_panoptic_png(const IdMap& map) {
  if (map.height() <= 0 || map.width() <= 0) {
    throw RangeError("cannot write an empty panoptic PNG");
  }
  const std::size_t stride = static_cast<std::size_t>(map.width()) * 3;
  std::vector<std::uint8_t> pixels(stride * map.height());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::uint32_t id = map[i];
    if (id > kMaxPngId) {
      throw RangeError("id " + std::to_string(id) +
                       " does not fit in 24-bit RGB");
    }
    pixels[3 * i] = static_cast<std::uint8_t>(id & 0xff);
    pixels[3 * i + 1] = static_cast<std::uint8_t>((id >> 8) & 0xff);
    pixels[3 * i + 2] = static_cast<std::uint8_t>((id >> 16) & 0xff);
  }
  std::vector<png_bytep> rows(map.height());
  for (int r = 0; r < map.height(); ++r) rows[r] = pixels.data() + stride * r;

  PngErrorSink sink;
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink,
                                                png_error_cb, png_warning_cb);
  if (png_ptr == nullptr) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (info == nullptr) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  Bytes out;
  PngEncodeSource source{static_cast<png_uint_32>(map.width()),
                         static_cast<png_uint_32>(map.height()), &rows, &out};
  const bool ok = encode_rows(png_ptr, info, &source);
  png_destroy_write_struct(&png_ptr, &info);
  if (!ok) throw FormatError(std::string("PNG encode failed: ") + sink.message);
  return out;
}

Field read_field(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFieldHeaderSize) {
    throw FormatError("field container: truncated header");
  }
  if (std::memcmp(bytes.data(), kFieldMagic.data(), kFieldMagic.size()) != 0) {
    throw FormatError("field container: bad magic");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kFieldVersion) {
    throw FormatError("field container: unsupported version " +
                      std::to_string(version));
  }
  const std::uint64_t channels = get_u32(bytes, 12);
  const std::uint64_t height = get_u32(bytes, 16);
  const std::uint64_t width = get_u32(bytes, 20);
  constexpr std::uint64_t kMaxDim = std::numeric_limits<int>::max();
  if (channels > kMaxDim || height > kMaxDim || width > kMaxDim) {
    throw FormatError("field container: dimension overflow");
  }
  // channels * height fits in 64 bits; compare against the payload before
  // multiplying by width so that the product cannot overflow.
  const std::uint64_t payload = bytes.size() - kFieldHeaderSize;
  const std::uint64_t plane_rows = channels * height;
  if (width != 0 && plane_rows > payload / 4 / width) {
    throw FormatError("field container: truncated payload");
  }
  const std::uint64_t count = plane_rows * width;
  if (payload != count * 4) {
    throw FormatError("field container: trailing bytes after payload");
  }
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, kFieldHeaderSize + 4 * i));
    if (!std::isfinite(f)) throw FormatError("field container: non-finite value");
    values[i] = f;
  }
  return Field(static_cast<int>(channels), static_cast<int>(height),
               static_cast<int>(width), std::move(values));
}

Bytes write_field(const Field& field) {
  Bytes out;
  out.reserve(kFieldHeaderSize + 4 * field.size());
  out.insert(out.end(), kFieldMagic.begin(), kFieldMagic.end());
  put_u32(out, kFieldVersion);
  put_u32(out, static_cast<std::uint32_t>(field.channels()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  for (double v : field.values()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw RangeError("field value overflows float32");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Field round_to_float32(const Field& field) {
  std::vector<double> values(field.values().begin(), field.values().end());
  for (double& v : values) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw RangeError("field value overflows float32");
    v = f;
  }
  return Field(field.channels(), field.height(), field.width(),
               std::move(values));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)),
              std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text) {
  write_file_atomic(
      path, std::span<const std::uint8_t>(
                reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace ppe
