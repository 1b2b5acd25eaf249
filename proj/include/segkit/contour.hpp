#pragma once

#include <optional>
#include <span>
#include <vector>

#include "segkit/raster.hpp"

namespace segkit {

// A closed ring through pixel centers. Outer rings have positive shoelace
// area in (x, y) image coordinates, hole rings negative; the first vertex is
// the smallest by (y, x).
struct Contour {
  Polygon points;
  bool is_hole = false;
};

struct ContourOptions {
  // Douglas-Peucker tolerance in pixels. 0 keeps exact pixel boundaries.
  double simplify_tolerance = 0.0;
};

// One outer ring per 8-connected foreground component, each followed by the
// rings bounding its 4-connected holes. Collinear pass-through vertices are
// dropped. Throws EmptyMask for an all-background mask.
std::vector<Contour> mask_to_contours(const BinaryMask& mask,
                                      const ContourOptions& options = {});

// Pixel (x, y) is foreground iff its center lies on a polygon edge or has odd
// even-odd crossing parity over all polygons. Throws OutOfBounds for vertices
// outside [0,width) x [0,height).
BinaryMask contours_to_mask(std::span<const Polygon> polygons, int width,
                            int height);
BinaryMask contours_to_mask(std::span<const Contour> contours, int width,
                            int height);

// Joins every ring of the mask into one vertex sequence using doubled bridge
// edges that pass through no pixel center, so that contours_to_mask of the
// result reproduces the mask exactly. Returns nullopt when no such bridge
// exists (e.g. two isolated pixels two apart). Throws EmptyMask.
std::optional<Polygon> mask_to_polygon(const BinaryMask& mask);

// Signed shoelace area.
double signed_area(std::span<const Point> ring);

Polygon simplify_polygon(const Polygon& ring, double tolerance);

}  // namespace segkit
