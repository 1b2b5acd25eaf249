#include "segkit/png_io.hpp"

#include <png.h>

#ifdef SEGKIT_HAVE_LIBDEFLATE
#include <libdeflate.h>
#else
#include <zlib.h>
#endif

#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "segkit/error.hpp"

namespace segkit::io {

namespace {

struct ErrorSink {
  char message[256];
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

class File {
 public:
  File(const fs::path& path, const char* mode)
      : handle_(std::fopen(path.c_str(), mode)) {
    if (!handle_) {
      throw Error(ErrorCode::Io, "cannot open '" + path.string() + "': " +
                                     std::strerror(errno));
    }
  }
  ~File() {
    if (handle_) std::fclose(handle_);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
  std::FILE* get() const { return handle_; }
  int close() {
    const int rc = std::fclose(handle_);
    handle_ = nullptr;
    return rc;
  }

 private:
  std::FILE* handle_;
};

enum class Target { Info, Bytes8, Gray16 };

struct Decoded {
  PngInfo info;
  std::vector<std::uint8_t> bytes;  // 8-bit samples or native-endian uint16
  std::vector<png_bytep> rows;
};

// Only trivially destructible locals between setjmp and any longjmp.
bool decode(std::FILE* fp, Target target, Decoded* out, ErrorSink* sink) {
  unsigned char signature[8];
  if (std::fread(signature, 1, 8, fp) != 8 || png_sig_cmp(signature, 0, 8)) {
    std::snprintf(sink->message, sizeof(sink->message), "not a PNG file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, sink,
                                           on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (color == PNG_COLOR_TYPE_PALETTE) depth = 8;
  const bool gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  const bool alpha = (color & PNG_COLOR_MASK_ALPHA) != 0 ||
                     png_get_valid(png, info, PNG_INFO_tRNS);

  out->info.width = static_cast<int>(width);
  out->info.height = static_cast<int>(height);
  out->info.channels = (gray ? 1 : 3) + (alpha ? 1 : 0);
  out->info.bit_depth = depth;
  if (target == Target::Info) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
  }

  if (alpha) png_set_strip_alpha(png);
  if (target == Target::Bytes8) {
    if (depth == 16) png_set_strip_16(png);
  } else {
    if (!gray) {
      std::snprintf(sink->message, sizeof(sink->message),
                    "expected a single-channel image");
      png_destroy_read_struct(&png, &info, nullptr);
      return false;
    }
    if (depth == 16) png_set_swap(png);
  }
  png_read_update_info(png, info);

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out->bytes.resize(row_bytes * height);
  out->rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    out->rows[y] = out->bytes.data() + y * row_bytes;
  }
  png_read_image(png, out->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

#ifndef SEGKIT_HAVE_LIBDEFLATE
bool encode(std::FILE* fp, int width, int height, int color, int depth,
            png_bytep* rows, int compression, ErrorSink* sink) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, sink,
                                            on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_compression_level(png, compression);
  if (compression >= 1 && compression <= 3) {
    // Fast levels: Sub filter plus run-length matching compresses smooth
    // frames and sparse masks about as well as the default at twice the speed.
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
    png_set_compression_strategy(png, Z_RLE);
  }
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}
#endif

#ifdef SEGKIT_HAVE_LIBDEFLATE
struct CompressorFree {
  void operator()(libdeflate_compressor* c) const { libdeflate_free_compressor(c); }
};

libdeflate_compressor* compressor(int level) {
  thread_local std::array<std::unique_ptr<libdeflate_compressor, CompressorFree>, 10> cache;
  auto& slot = cache[static_cast<std::size_t>(level)];
  if (!slot) slot.reset(libdeflate_alloc_compressor(level));
  return slot.get();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                             static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  out.insert(out.end(), b, b + 4);
}

// Appends a chunk whose payload already sits at out[start + 8 ..].
void seal_chunk(std::vector<std::uint8_t>& out, std::size_t start, const char* type) {
  const auto length = static_cast<std::uint32_t>(out.size() - start - 8);
  for (int i = 0; i < 4; ++i) {
    out[start + i] = static_cast<std::uint8_t>(length >> (24 - 8 * i));
    out[start + 4 + i] = static_cast<std::uint8_t>(type[i]);
  }
  put_u32(out, libdeflate_crc32(0, out.data() + start + 4, length + 4));
}

// Whole-image encoder: every row uses the Sub filter and the stream is one
// IDAT chunk. `rows` hold 8-bit samples or native-endian uint16.
bool encode_fast(std::FILE* fp, int width, int height, int channels, int depth,
                 const std::uint8_t* const* rows, int level) {
  const std::size_t bpp = static_cast<std::size_t>(channels) * depth / 8;
  const std::size_t row_bytes = bpp * width;
  std::vector<std::uint8_t> filtered((row_bytes + 1) * height);
  std::vector<std::uint8_t> wide(depth == 16 ? row_bytes : 0);
  std::uint8_t* dst = filtered.data();
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* src = rows[y];
    if (depth == 16) {
      for (std::size_t i = 0; i < row_bytes; i += 2) {
        std::uint16_t v;
        std::memcpy(&v, src + i, 2);
        wide[i] = static_cast<std::uint8_t>(v >> 8);
        wide[i + 1] = static_cast<std::uint8_t>(v);
      }
      src = wide.data();
    }
    *dst++ = 1;
    std::memcpy(dst, src, bpp);
    for (std::size_t i = bpp; i < row_bytes; ++i) {
      dst[i] = static_cast<std::uint8_t>(src[i] - src[i - bpp]);
    }
    dst += row_bytes;
  }

  libdeflate_compressor* c = compressor(level);
  if (!c) return false;
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::size_t start = out.size();
  out.resize(start + 8);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  out.push_back(static_cast<std::uint8_t>(depth));
  out.push_back(channels == 3 ? 2 : 0);
  out.insert(out.end(), {0, 0, 0});
  seal_chunk(out, start, "IHDR");

  start = out.size();
  const std::size_t bound = libdeflate_zlib_compress_bound(c, filtered.size());
  out.resize(start + 8 + bound);
  const std::size_t n = libdeflate_zlib_compress(c, filtered.data(), filtered.size(),
                                                 out.data() + start + 8, bound);
  if (n == 0) return false;
  out.resize(start + 8 + n);
  seal_chunk(out, start, "IDAT");

  start = out.size();
  out.resize(start + 8);
  seal_chunk(out, start, "IEND");
  return std::fwrite(out.data(), 1, out.size(), fp) == out.size();
}
#endif

Decoded load(const fs::path& path, Target target) {
  File file(path, "rb");
  Decoded decoded;
  ErrorSink sink{};
  if (!decode(file.get(), target, &decoded, &sink)) {
    throw Error(ErrorCode::Parse,
                "cannot decode PNG '" + path.string() + "': " + sink.message);
  }
  return decoded;
}

void store(const fs::path& path, int width, int height, int color, int depth,
           std::vector<png_bytep>& rows, int compression) {
  if (compression < 0 || compression > 9) {
    throw Error(ErrorCode::Config, "PNG compression must be in [0, 9], got " +
                                       std::to_string(compression));
  }
  File file(path, "wb");
#ifdef SEGKIT_HAVE_LIBDEFLATE
  const int channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  if (!encode_fast(file.get(), width, height, channels, depth, rows.data(), compression)) {
    throw Error(ErrorCode::Io, "cannot write PNG '" + path.string() + "'");
  }
#else
  ErrorSink sink{};
  if (!encode(file.get(), width, height, color, depth, rows.data(),
              compression, &sink)) {
    throw Error(ErrorCode::Io,
                "cannot write PNG '" + path.string() + "': " + sink.message);
  }
#endif
  if (file.close() != 0) {
    throw Error(ErrorCode::Io, "cannot finish writing '" + path.string() + "'");
  }
}

}  // namespace

PngInfo read_png_info(const fs::path& path) {
  return load(path, Target::Info).info;
}

Raster read_png(const fs::path& path) {
  Decoded d = load(path, Target::Bytes8);
  const int channels = d.info.channels >= 3 ? 3 : 1;
  return Raster(d.info.width, d.info.height, channels, std::move(d.bytes));
}

void write_png(const Raster& image, const fs::path& path, int compression) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
  for (int y = 0; y < image.height(); ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(image.row(y));
  }
  store(path, image.width(), image.height(),
        image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8,
        rows, compression);
}

Gray16 read_png16(const fs::path& path) {
  Decoded d = load(path, Target::Gray16);
  Gray16 out{d.info.width, d.info.height, {}};
  const std::size_t n = static_cast<std::size_t>(d.info.width) * d.info.height;
  out.data.resize(n);
  if (d.info.bit_depth == 16) {
    std::memcpy(out.data.data(), d.bytes.data(), n * sizeof(std::uint16_t));
  } else {
    for (std::size_t i = 0; i < n; ++i) out.data[i] = d.bytes[i];
  }
  return out;
}

void write_png16(const Gray16& image, const fs::path& path, int compression) {
  if (image.data.size() !=
      static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::ShapeMismatch, "16-bit image data length mismatch");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(image.data.data()) +
        static_cast<std::size_t>(y) * image.width);
  }
  store(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 16, rows,
        compression);
}

}  // namespace segkit::io
