#pragma once

#include <cstdint>

#include "segkit/raster.hpp"

namespace segkit::color {

// Half away from zero; the rounding rule for every 8-bit quantization.
double round_half_away(double v);

// 0.2125 R + 0.7154 G + 0.0721 B on the stored 8-bit values, computed in
// exact integer arithmetic.
std::uint8_t gray_value(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// CIE L* of an sRGB pixel (D65), in [0, 100].
double lab_lightness(std::uint8_t r, std::uint8_t g, std::uint8_t b);
// L* scaled by 2.55 and rounded to 8 bits.
std::uint8_t lightness_value(std::uint8_t r, std::uint8_t g, std::uint8_t b);

Raster to_grayscale(const Raster& rgb);
Raster to_lab_l(const Raster& rgb);

inline constexpr int kGrayChannel = 0;
inline constexpr int kLightnessChannel = 1;
inline constexpr int kMaskChannel = 2;

// Three planes: grayscale, L* lightness, semantic mask in {0, 255}.
struct GLMaskImage {
  Raster pixels;
};

GLMaskImage assemble_glmask(const Raster& rgb, const BinaryMask& semantic_mask);

}  // namespace segkit::color
