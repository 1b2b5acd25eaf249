#pragma once

#include <array>
#include <utility>

#include <json.hpp>

#include "segkit/cutout.hpp"
#include "segkit/raster.hpp"
#include "segkit/rng.hpp"

namespace segkit::aug {

// Object-level transforms applied to cutouts before pasting. Each enabled
// transform fires with its own probability, in the order flip, rotation,
// elastic.
struct SpatialAugment {
  bool flip = false;
  double flip_p = 0.5;
  bool rotation = false;
  double rotation_p = 0.5;
  double max_degrees = 180.0;
  bool elastic = false;
  double elastic_p = 0.5;
  int elastic_grid = 16;         // pixels between displacement nodes
  double elastic_magnitude = 8;  // std-dev of node displacements, pixels

  bool any() const noexcept { return flip || rotation || elastic; }
};

// Image-level transforms, applied in the order jitter, shuffle, dropout,
// solarize, blur, noise.
struct PixelAugment {
  bool color_jitter = false;
  double jitter_p = 0.5;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  bool channel_shuffle = false;
  double shuffle_p = 0.5;
  bool channel_dropout = false;
  double dropout_p = 0.5;
  bool solarize = false;
  double solarize_p = 0.5;
  int solarize_threshold = 128;
  bool blur = false;
  double blur_p = 0.5;
  int blur_max_kernel = 5;  // odd, >= 3
  bool noise = false;
  double noise_p = 0.5;
  double noise_sigma = 8.0;

  bool any() const noexcept {
    return color_jitter || channel_shuffle || channel_dropout || solarize ||
           blur || noise;
  }
};

struct AugmentationSpec {
  SpatialAugment spatial;
  PixelAugment pixel;
  std::uint64_t stream = 0;

  // Config error for probabilities outside [0,1] or degenerate ranges on an
  // enabled transform.
  void validate() const;
};

nlohmann::json to_json(const AugmentationSpec& spec);
AugmentationSpec augmentation_from_json(const nlohmann::json& doc);

enum class FlipAxis { Horizontal, Vertical, Both };

Cutout flip(const Cutout& cutout, FlipAxis axis);
// Rotates about the patch center, growing the box to hold the result.
Cutout rotate_cutout(const Cutout& cutout, double degrees);
// Coarse random displacement grid, bilinearly interpolated per pixel.
Cutout elastic_cutout(const Cutout& cutout, int grid, double magnitude,
                      Rng& rng);
// Returns the input unchanged when every toggle is off, or when three
// attempts all leave an empty alpha.
Cutout object_spatial_augment(const Cutout& cutout, const SpatialAugment& spec,
                              Rng& rng);

Raster color_jitter(const Raster& image, double brightness, double contrast,
                    double saturation);
Raster shuffle_channels(const Raster& image, const std::array<int, 3>& order);
Raster drop_channel(const Raster& image, int channel);
Raster solarize(const Raster& image, int threshold);
// Normalized box filter of odd size with edge replication.
Raster box_blur(const Raster& image, int kernel);
Raster add_noise(const Raster& image, double sigma, Rng& rng);
Raster pixel_augment(const Raster& image, const PixelAugment& spec, Rng& rng);

struct RotationDropRule {
  double min_fraction = 0.2;
  std::int64_t min_pixels = 16;
};

// Rotates by whole degrees (clockwise as displayed; normalized mod 360) about
// the image center on a fixed canvas. Image bilinear, masks nearest; uncovered
// pixels become black/background. Instances keep their ids and are dropped
// when their remaining area falls under the rule.
std::pair<Raster, InstanceSet> rotate_pair(const Raster& image,
                                           const InstanceSet& instances,
                                           int degrees,
                                           const RotationDropRule& rule = {});

}  // namespace segkit::aug
