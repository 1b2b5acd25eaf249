#pragma once

#include <algorithm>
#include <string>

#include "segkit/raster.hpp"

namespace segkit {

enum class CutoutKind { Fake, Real };

// An object lifted from an annotated frame: the tight RGB box plus a binary
// alpha over the same box.
struct Cutout {
  Raster patch;
  BinaryMask alpha;
  CutoutKind kind = CutoutKind::Real;
  std::string source_id;

  int max_dim() const noexcept { return std::max(patch.width(), patch.height()); }
};

}  // namespace segkit
