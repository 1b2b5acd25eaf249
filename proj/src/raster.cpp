#include "segkit/raster.hpp"

#include <algorithm>
#include <set>

#include "segkit/error.hpp"

namespace segkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientPool: return "InsufficientPool";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::Validation: return "ValidationError";
    case ErrorCode::Config: return "ConfigError";
  }
  return "Unknown";
}

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::ShapeMismatch,
                "raster dimensions must be positive, got " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

Raster::Raster(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "raster channels must be 1 or 3");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Raster::Raster(int width, int height, int channels,
               std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels),
      data_(std::move(data)) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "raster channels must be 1 or 3");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::ShapeMismatch,
                "raster data length does not match width*height*channels");
  }
}

Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {};
  return {x0, y0, x1 - x0, y1 - y0};
}

Rect unite(const Rect& a, const Rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
}

BinaryMask::BinaryMask(int width, int height, Rect roi)
    : width_(width), height_(height) {
  check_dims(width, height);
  roi_ = intersect(roi, Rect{0, 0, width, height});
  bits_.assign(static_cast<std::size_t>(roi_.area()), 0);
}

BinaryMask BinaryMask::from_dense(int width, int height,
                                  std::span<const std::uint8_t> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::ShapeMismatch,
                "dense mask length does not match width*height");
  }
  BinaryMask full(width, height, Rect{0, 0, width, height});
  for (std::size_t i = 0; i < values.size(); ++i) {
    full.bits_[i] = values[i] != 0 ? 1 : 0;
  }
  return full.tightened();
}

std::int64_t BinaryMask::count() const noexcept {
  return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
}

bool BinaryMask::any() const noexcept {
  return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
}

Rect BinaryMask::bounds() const noexcept {
  int x0 = roi_.right(), y0 = roi_.bottom(), x1 = roi_.x - 1, y1 = roi_.y - 1;
  for (int y = roi_.y; y < roi_.bottom(); ++y) {
    const std::uint8_t* r = roi_row(y);
    for (int i = 0; i < roi_.width; ++i) {
      if (!r[i]) continue;
      const int x = roi_.x + i;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < x0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

BinaryMask BinaryMask::tightened() const { return with_roi(bounds()); }

BinaryMask BinaryMask::with_roi(Rect roi) const {
  BinaryMask out(width_, height_, roi);
  const Rect common = intersect(out.roi_, roi_);
  for (int y = common.y; y < common.bottom(); ++y) {
    const std::uint8_t* src = roi_row(y) + (common.x - roi_.x);
    std::uint8_t* dst = out.roi_row(y) + (common.x - out.roi_.x);
    std::copy(src, src + common.width, dst);
  }
  return out;
}

std::vector<std::uint8_t> BinaryMask::to_dense() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width_) * height_, 0);
  for (int y = roi_.y; y < roi_.bottom(); ++y) {
    const std::uint8_t* src = roi_row(y);
    std::uint8_t* dst = out.data() + static_cast<std::size_t>(y) * width_;
    for (int i = 0; i < roi_.width; ++i) {
      if (src[i]) dst[roi_.x + i] = 255;
    }
  }
  return out;
}

bool BinaryMask::operator==(const BinaryMask& other) const {
  if (width_ != other.width_ || height_ != other.height_) return false;
  const Rect all = unite(roi_, other.roi_);
  for (int y = all.y; y < all.bottom(); ++y) {
    for (int x = all.x; x < all.right(); ++x) {
      if (at(x, y) != other.at(x, y)) return false;
    }
  }
  return true;
}

void InstanceSet::validate() const {
  std::set<int> ids;
  for (const auto& inst : instances) {
    if (inst.mask.width() != width || inst.mask.height() != height) {
      throw Error(ErrorCode::ShapeMismatch,
                  "instance " + std::to_string(inst.id) + " in '" + image_id +
                      "' has mask dimensions different from the image");
    }
    if (!ids.insert(inst.id).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate instance id " +
                                               std::to_string(inst.id) +
                                               " in '" + image_id + "'");
    }
    if (!inst.mask.any()) {
      throw Error(ErrorCode::EmptyMask, "instance " + std::to_string(inst.id) +
                                            " in '" + image_id +
                                            "' has an empty mask");
    }
    if (inst.confidence && (*inst.confidence < 0.0 || *inst.confidence > 1.0)) {
      throw Error(ErrorCode::InvalidInput,
                  "instance " + std::to_string(inst.id) +
                      " confidence outside [0,1]");
    }
  }
}

BinaryMask union_mask(const InstanceSet& set) {
  Rect all{};
  for (const auto& inst : set.instances) all = unite(all, inst.mask.roi());
  BinaryMask out(set.width, set.height, all);
  for (const auto& inst : set.instances) {
    const Rect& r = inst.mask.roi();
    for (int y = r.y; y < r.bottom(); ++y) {
      const std::uint8_t* src = inst.mask.roi_row(y);
      for (int i = 0; i < r.width; ++i) {
        if (src[i]) out.set(r.x + i, y, true);
      }
    }
  }
  return out.tightened();
}

BinaryMask crop_to_bounds(const BinaryMask& mask) {
  const Rect box = mask.bounds();
  if (box.empty()) throw Error(ErrorCode::EmptyMask, "mask has no foreground");
  BinaryMask out(box.width, box.height, Rect{0, 0, box.width, box.height});
  for (int y = 0; y < box.height; ++y) {
    const std::uint8_t* src = mask.roi_row(box.y + y) + (box.x - mask.roi().x);
    std::copy(src, src + box.width, out.roi_row(y));
  }
  return out;
}

std::int64_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch,
                "mask dimensions differ: " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
  const Rect common = intersect(a.roi(), b.roi());
  std::int64_t inter = 0;
  for (int y = common.y; y < common.bottom(); ++y) {
    const std::uint8_t* pa = a.roi_row(y) + (common.x - a.roi().x);
    const std::uint8_t* pb = b.roi_row(y) + (common.x - b.roi().x);
    for (int i = 0; i < common.width; ++i) inter += pa[i] & pb[i];
  }
  return inter;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const std::int64_t inter = intersection_count(a, b);
  const std::int64_t uni = a.count() + b.count() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace segkit
