#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segkit {

// Row-major interleaved 8-bit image with 1 or 3 channels.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, std::uint8_t fill = 0);
  Raster(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }
  std::uint8_t* row(int y) noexcept {
    return data_.data() + static_cast<std::size_t>(y) * width_ * channels_;
  }
  const std::uint8_t* row(int y) const noexcept {
    return data_.data() + static_cast<std::size_t>(y) * width_ * channels_;
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  int right() const noexcept { return x + width; }
  int bottom() const noexcept { return y + height; }
  bool contains(int px, int py) const noexcept {
    return px >= x && py >= y && px < right() && py < bottom();
  }
  std::int64_t area() const noexcept {
    return empty() ? 0 : static_cast<std::int64_t>(width) * height;
  }
  bool operator==(const Rect&) const = default;
};

Rect intersect(const Rect& a, const Rect& b);
Rect unite(const Rect& a, const Rect& b);

// A foreground/background mask over a width x height frame. Storage covers
// only a region of interest; everything outside it is background. Two masks
// compare equal when their pixels agree, whatever their storage regions.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, Rect roi);

  // Nonzero samples become foreground. `values` is width*height, row-major.
  static BinaryMask from_dense(int width, int height,
                               std::span<const std::uint8_t> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Rect& roi() const noexcept { return roi_; }

  bool at(int x, int y) const noexcept {
    if (!roi_.contains(x, y)) return false;
    return bits_[local(x, y)] != 0;
  }
  // (x, y) must lie inside roi().
  void set(int x, int y, bool value) noexcept {
    bits_[local(x, y)] = value ? 1 : 0;
  }
  // Row pointer into roi storage; `y` in image coordinates.
  const std::uint8_t* roi_row(int y) const noexcept {
    return bits_.data() + static_cast<std::size_t>(y - roi_.y) * roi_.width;
  }
  std::uint8_t* roi_row(int y) noexcept {
    return bits_.data() + static_cast<std::size_t>(y - roi_.y) * roi_.width;
  }

  std::int64_t count() const noexcept;
  bool any() const noexcept;
  // Tight bounding box of foreground; empty Rect when the mask is empty.
  Rect bounds() const noexcept;
  BinaryMask tightened() const;
  // Copy with storage widened (or shrunk) to `roi`, clipped to the frame.
  BinaryMask with_roi(Rect roi) const;

  // Dense row-major samples serialized as {0, 255}.
  std::vector<std::uint8_t> to_dense() const;

  bool operator==(const BinaryMask& other) const;

 private:
  std::size_t local(int x, int y) const noexcept {
    return static_cast<std::size_t>(y - roi_.y) * roi_.width + (x - roi_.x);
  }

  int width_ = 0;
  int height_ = 0;
  Rect roi_{};
  std::vector<std::uint8_t> bits_;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

using Polygon = std::vector<Point>;

struct InstanceAnnotation {
  int id = 0;
  int class_id = 0;
  BinaryMask mask;
  std::optional<double> confidence;
};

struct InstanceSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<InstanceAnnotation> instances;

  // Throws ShapeMismatch / InvalidInput / EmptyMask on a broken invariant.
  void validate() const;
};

// Pixel union of every instance mask.
BinaryMask union_mask(const InstanceSet& set);

// Tight crop of `mask`'s foreground into a standalone mask whose frame is the
// bounding box. Throws EmptyMask on an empty mask.
BinaryMask crop_to_bounds(const BinaryMask& mask);

double mask_iou(const BinaryMask& a, const BinaryMask& b);
std::int64_t intersection_count(const BinaryMask& a, const BinaryMask& b);

}  // namespace segkit
