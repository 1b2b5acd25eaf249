#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segkit/raster.hpp"

namespace segkit::io {

namespace fs = std::filesystem;

struct PngInfo {
  int width = 0;
  int height = 0;
  int channels = 0;   // after palette expansion, alpha included
  int bit_depth = 0;  // 8 or 16 after expansion of 1/2/4-bit gray
};

// Deflate level (0-9) used by every writer unless a caller overrides it.
// Rows use the Sub filter; with libdeflate each level is about twice as fast
// as zlib's and the files come out smaller.
inline constexpr int kDefaultPngCompression = 1;

PngInfo read_png_info(const fs::path& path);

// 8-bit gray or RGB. Palette images expand to RGB, alpha is dropped and
// 16-bit samples are reduced to 8 bits.
Raster read_png(const fs::path& path);
void write_png(const Raster& image, const fs::path& path,
               int compression = kDefaultPngCompression);

// Single-channel samples widened to 16 bits; 8-bit gray files are accepted.
struct Gray16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;
};

Gray16 read_png16(const fs::path& path);
void write_png16(const Gray16& image, const fs::path& path,
                 int compression = kDefaultPngCompression);

}  // namespace segkit::io
