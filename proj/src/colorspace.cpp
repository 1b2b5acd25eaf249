#include "segkit/colorspace.hpp"

#include <array>
#include <cmath>
#include <string>

#include "segkit/error.hpp"

namespace segkit::color {

namespace {

void require_rgb(const Raster& rgb, const char* what) {
  if (rgb.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " expects a 3-channel image, got " +
                    std::to_string(rgb.channels()));
  }
}

// IEC 61966-2-1 inverse transfer function, indexed by 8-bit code value.
const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return table;
}

std::uint8_t clamp_byte(double v) {
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v);
}

}  // namespace

double round_half_away(double v) { return std::round(v); }

std::uint8_t gray_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int scaled = 2125 * r + 7154 * g + 721 * b;  // x 10^4
  const int v = (scaled + 5000) / 10000;
  return static_cast<std::uint8_t>(v > 255 ? 255 : v);
}

double lab_lightness(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& lin = linear_table();
  // Y row of the sRGB -> XYZ matrix; the D65 white has Yn = 1.
  const double y = 0.212671 * lin[r] + 0.715160 * lin[g] + 0.072169 * lin[b];
  constexpr double delta = 6.0 / 29.0;
  const double f = y > delta * delta * delta
                       ? std::cbrt(y)
                       : y / (3.0 * delta * delta) + 4.0 / 29.0;
  return 116.0 * f - 16.0;
}

std::uint8_t lightness_value(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return clamp_byte(round_half_away(lab_lightness(r, g, b) * 2.55));
}

Raster to_grayscale(const Raster& rgb) {
  require_rgb(rgb, "to_grayscale");
  Raster out(rgb.width(), rgb.height(), 1);
  const auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = gray_value(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

Raster to_lab_l(const Raster& rgb) {
  require_rgb(rgb, "to_lab_l");
  Raster out(rgb.width(), rgb.height(), 1);
  const auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = lightness_value(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

GLMaskImage assemble_glmask(const Raster& rgb, const BinaryMask& semantic_mask) {
  require_rgb(rgb, "assemble_glmask");
  if (semantic_mask.width() != rgb.width() ||
      semantic_mask.height() != rgb.height()) {
    throw Error(ErrorCode::ShapeMismatch,
                "semantic mask " + std::to_string(semantic_mask.width()) + "x" +
                    std::to_string(semantic_mask.height()) +
                    " does not match image " + std::to_string(rgb.width()) +
                    "x" + std::to_string(rgb.height()));
  }
  Raster out(rgb.width(), rgb.height(), 3);
  for (int y = 0; y < rgb.height(); ++y) {
    const std::uint8_t* src = rgb.row(y);
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < rgb.width(); ++x) {
      const std::uint8_t r = src[3 * x], g = src[3 * x + 1], b = src[3 * x + 2];
      dst[3 * x + kGrayChannel] = gray_value(r, g, b);
      dst[3 * x + kLightnessChannel] = lightness_value(r, g, b);
      dst[3 * x + kMaskChannel] = semantic_mask.at(x, y) ? 255 : 0;
    }
  }
  return {std::move(out)};
}

}  // namespace segkit::color
