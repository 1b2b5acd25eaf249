#include "segkit/contour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

#include "segkit/error.hpp"

namespace segkit {

namespace {

// Neighbor offsets (row, col), clockwise on screen starting east.
constexpr int kDi[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDj[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int direction(int di, int dj) {
  for (int d = 0; d < 8; ++d) {
    if (kDi[d] == di && kDj[d] == dj) return d;
  }
  return -1;
}

struct GridPoint {
  int x;
  int y;
  bool operator==(const GridPoint&) const = default;
};

bool strictly_between(const GridPoint& a, const GridPoint& b,
                      const GridPoint& c) {
  const long long cross = static_cast<long long>(b.x - a.x) * (c.y - b.y) -
                          static_cast<long long>(b.y - a.y) * (c.x - b.x);
  if (cross != 0) return false;
  const long long dot = static_cast<long long>(b.x - a.x) * (c.x - b.x) +
                        static_cast<long long>(b.y - a.y) * (c.y - b.y);
  return dot > 0;
}

std::vector<GridPoint> drop_collinear(std::vector<GridPoint> ring) {
  bool changed = true;
  while (changed && ring.size() > 2) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() > 2;) {
      const std::size_t n = ring.size();
      const GridPoint& prev = ring[(i + n - 1) % n];
      const GridPoint& next = ring[(i + 1) % n];
      if (strictly_between(prev, ring[i], next)) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      } else {
        ++i;
      }
    }
  }
  // A ring that doubles back on a single segment, e.g. [A, B, A].
  if (ring.size() == 2 && ring[0] == ring[1]) ring.pop_back();
  return ring;
}

long long twice_area(const std::vector<GridPoint>& ring) {
  long long s = 0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GridPoint& p = ring[i];
    const GridPoint& q = ring[(i + 1) % n];
    s += static_cast<long long>(p.x) * q.y - static_cast<long long>(q.x) * p.y;
  }
  return s;
}

void normalize_ring(std::vector<GridPoint>& ring, bool hole) {
  const long long a = twice_area(ring);
  if ((hole && a > 0) || (!hole && a < 0)) std::reverse(ring.begin(), ring.end());
  const auto first = std::min_element(
      ring.begin(), ring.end(), [](const GridPoint& l, const GridPoint& r) {
        return l.y != r.y ? l.y < r.y : l.x < r.x;
      });
  std::rotate(ring.begin(), first, ring.end());
}

// Border following over the mask's storage region (Suzuki & Abe), foreground
// 8-connected and background 4-connected.
struct TracedRing {
  std::vector<GridPoint> points;
  bool hole;
};

std::vector<TracedRing> trace_rings(const BinaryMask& mask) {
  const Rect roi = mask.roi();
  const int w = roi.width + 2;
  const int h = roi.height + 2;
  std::vector<int> f(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int i, int j) -> int& {
    return f[static_cast<std::size_t>(i) * w + j];
  };
  for (int y = 0; y < roi.height; ++y) {
    const std::uint8_t* r = mask.roi_row(roi.y + y);
    for (int x = 0; x < roi.width; ++x) at(y + 1, x + 1) = r[x] ? 1 : 0;
  }

  std::vector<TracedRing> rings;
  int nbd = 1;
  for (int i = 1; i < h - 1; ++i) {
    for (int j = 1; j < w - 1; ++j) {
      const int v = at(i, j);
      if (v == 0) continue;
      int i2, j2;
      bool hole;
      if (v == 1 && at(i, j - 1) == 0) {
        hole = false;
        i2 = i;
        j2 = j - 1;
      } else if (v >= 1 && at(i, j + 1) == 0) {
        hole = true;
        i2 = i;
        j2 = j + 1;
      } else {
        continue;
      }
      ++nbd;
      TracedRing ring{{}, hole};
      auto emit = [&](int ri, int rj) {
        ring.points.push_back({rj - 1 + roi.x, ri - 1 + roi.y});
      };

      const int d0 = direction(i2 - i, j2 - j);
      int i1 = -1, j1 = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (d0 + k) % 8;
        if (at(i + kDi[d], j + kDj[d]) != 0) {
          i1 = i + kDi[d];
          j1 = j + kDj[d];
          break;
        }
      }
      if (i1 < 0) {
        at(i, j) = -nbd;
        emit(i, j);
        rings.push_back(std::move(ring));
        continue;
      }

      i2 = i1;
      j2 = j1;
      int i3 = i, j3 = j;
      for (;;) {
        const int d = direction(i2 - i3, j2 - j3);
        bool east_zero = false;
        int i4 = -1, j4 = -1;
        for (int k = 1; k <= 8; ++k) {
          const int dd = ((d - k) % 8 + 8) % 8;
          const int ni = i3 + kDi[dd];
          const int nj = j3 + kDj[dd];
          if (at(ni, nj) != 0) {
            i4 = ni;
            j4 = nj;
            break;
          }
          if (dd == 0) east_zero = true;
        }
        if (east_zero) {
          at(i3, j3) = -nbd;
        } else if (at(i3, j3) == 1) {
          at(i3, j3) = nbd;
        }
        emit(i3, j3);
        if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
        i2 = i3;
        j2 = j3;
        i3 = i4;
        j3 = j4;
      }
      rings.push_back(std::move(ring));
    }
  }
  return rings;
}

Polygon to_polygon(const std::vector<GridPoint>& ring) {
  Polygon out;
  out.reserve(ring.size());
  for (const auto& p : ring) out.push_back({double(p.x), double(p.y)});
  return out;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

void douglas_peucker(const Polygon& pts, std::size_t first, std::size_t last,
                     double tol, std::vector<bool>& keep) {
  if (last <= first + 1) return;
  double best = -1.0;
  std::size_t index = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = point_segment_distance(pts[i], pts[first], pts[last]);
    if (d > best) {
      best = d;
      index = i;
    }
  }
  if (best > tol) {
    keep[index] = true;
    douglas_peucker(pts, first, index, tol, keep);
    douglas_peucker(pts, index, last, tol, keep);
  }
}

constexpr double kEps = 1e-9;

}  // namespace

double signed_area(std::span<const Point> ring) {
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % n];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

Polygon simplify_polygon(const Polygon& ring, double tolerance) {
  if (tolerance <= 0.0 || ring.size() < 4) return ring;
  // Anchor the closed ring at vertex 0 and the vertex farthest from it.
  std::size_t far = 0;
  double best = -1.0;
  for (std::size_t i = 1; i < ring.size(); ++i) {
    const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  Polygon closed = ring;
  closed.push_back(ring[0]);
  std::vector<bool> keep(closed.size(), false);
  keep[0] = keep[far] = keep[closed.size() - 1] = true;
  douglas_peucker(closed, 0, far, tolerance, keep);
  douglas_peucker(closed, far, closed.size() - 1, tolerance, keep);
  Polygon out;
  for (std::size_t i = 0; i + 1 < closed.size(); ++i) {
    if (keep[i]) out.push_back(closed[i]);
  }
  return out;
}

std::vector<Contour> mask_to_contours(const BinaryMask& mask,
                                      const ContourOptions& options) {
  if (!mask.any()) {
    throw Error(ErrorCode::EmptyMask, "cannot trace contours of an empty mask");
  }
  std::vector<Contour> out;
  for (auto& traced : trace_rings(mask)) {
    auto ring = drop_collinear(std::move(traced.points));
    normalize_ring(ring, traced.hole);
    Polygon poly = to_polygon(ring);
    if (options.simplify_tolerance > 0.0) {
      poly = simplify_polygon(poly, options.simplify_tolerance);
    }
    out.push_back({std::move(poly), traced.hole});
  }
  return out;
}

BinaryMask contours_to_mask(std::span<const Contour> contours, int width,
                            int height) {
  std::vector<Polygon> polys;
  polys.reserve(contours.size());
  for (const auto& c : contours) polys.push_back(c.points);
  return contours_to_mask(polys, width, height);
}

BinaryMask contours_to_mask(std::span<const Polygon> polygons, int width,
                            int height) {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x, max_x = -min_x, max_y = -min_x;
  for (const auto& poly : polygons) {
    for (const auto& p : poly) {
      if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
        throw Error(ErrorCode::OutOfBounds,
                    "polygon vertex (" + std::to_string(p.x) + ", " +
                        std::to_string(p.y) + ") outside " +
                        std::to_string(width) + "x" + std::to_string(height));
      }
      min_x = std::min(min_x, p.x);
      min_y = std::min(min_y, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
  }
  if (min_x > max_x) return BinaryMask(width, height);

  const int x0 = static_cast<int>(std::floor(min_x));
  const int y0 = static_cast<int>(std::floor(min_y));
  const int x1 = static_cast<int>(std::ceil(max_x));
  const int y1 = static_cast<int>(std::ceil(max_y));
  BinaryMask out(width, height, Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1});
  const Rect roi = out.roi();

  std::vector<std::vector<double>> crossings(static_cast<std::size_t>(roi.height));
  auto mark = [&](double x, int y) {
    const double xr = std::round(x);
    if (std::abs(x - xr) < kEps) {
      const int xi = static_cast<int>(xr);
      if (roi.contains(xi, y)) out.set(xi, y, true);
    }
  };

  for (const auto& poly : polygons) {
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Point& p = poly[k];
      const Point& q = poly[(k + 1) % n];
      const int ylo = std::max(roi.y, static_cast<int>(std::ceil(std::min(p.y, q.y) - kEps)));
      const int yhi = std::min(roi.bottom() - 1, static_cast<int>(std::floor(std::max(p.y, q.y) + kEps)));
      if (std::abs(q.y - p.y) < kEps) {
        // Horizontal (or zero-length) edge: boundary only.
        const double yr = std::round(p.y);
        if (std::abs(p.y - yr) < kEps) {
          const int y = static_cast<int>(yr);
          const int xa = static_cast<int>(std::ceil(std::min(p.x, q.x) - kEps));
          const int xb = static_cast<int>(std::floor(std::max(p.x, q.x) + kEps));
          for (int x = xa; x <= xb; ++x) {
            if (roi.contains(x, y)) out.set(x, y, true);
          }
        }
        continue;
      }
      const double slope = (q.x - p.x) / (q.y - p.y);
      for (int y = ylo; y <= yhi; ++y) {
        const double x = p.x + (y - p.y) * slope;
        mark(x, y);
        if ((p.y > y) != (q.y > y)) {
          crossings[static_cast<std::size_t>(y - roi.y)].push_back(x);
        }
      }
    }
  }

  for (int y = roi.y; y < roi.bottom(); ++y) {
    auto& xs = crossings[static_cast<std::size_t>(y - roi.y)];
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int xa = std::max(roi.x, static_cast<int>(std::floor(xs[k])) + 1);
      const int xb = std::min(roi.right() - 1,
                              static_cast<int>(std::ceil(xs[k + 1])) - 1);
      for (int x = xa; x <= xb; ++x) {
        if (x > xs[k] && x < xs[k + 1]) out.set(x, y, true);
      }
    }
  }
  return out;
}

namespace {

bool primitive_step(const GridPoint& a, const GridPoint& b) {
  return std::gcd(std::abs(a.x - b.x), std::abs(a.y - b.y)) == 1;
}

long long dist2(const GridPoint& a, const GridPoint& b) {
  const long long dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct Attachment {
  std::vector<GridPoint> via;  // intermediate bridge vertices
  std::size_t child;
  std::size_t child_vertex;
};

struct Bridge {
  std::size_t ring;
  std::size_t vertex;
  std::vector<GridPoint> via;
  std::size_t child_vertex;
  long long cost;
};

// Breadth-first search for a chain of primitive hops through foreground
// pixels from any joined ring vertex to a vertex of an unjoined ring.
std::optional<Bridge> route_through_foreground(
    const BinaryMask& mask, const std::vector<std::vector<GridPoint>>& rings,
    const std::vector<bool>& joined, std::vector<GridPoint>& foreground,
    std::size_t& child) {
  if (foreground.empty()) {
    const Rect roi = mask.roi();
    for (int y = roi.y; y < roi.bottom(); ++y) {
      for (int x = roi.x; x < roi.right(); ++x) {
        if (mask.at(x, y)) foreground.push_back({x, y});
      }
    }
  }
  const Rect roi = mask.roi();
  auto index_of = [&](const GridPoint& p) {
    return static_cast<std::size_t>(p.y - roi.y) * roi.width + (p.x - roi.x);
  };
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(static_cast<std::size_t>(roi.area()), kNone);
  std::vector<char> seen(parent.size(), 0);
  struct Origin {
    std::size_t ring;
    std::size_t vertex;
  };
  std::vector<Origin> origin(parent.size(), {0, 0});
  std::vector<GridPoint> queue;
  for (std::size_t r = 0; r < rings.size(); ++r) {
    if (!joined[r]) continue;
    for (std::size_t a = 0; a < rings[r].size(); ++a) {
      const std::size_t k = index_of(rings[r][a]);
      if (seen[k]) continue;
      seen[k] = 1;
      origin[k] = {r, a};
      queue.push_back(rings[r][a]);
    }
  }
  // Target lookup: pixel -> (ring, vertex) for unjoined rings.
  std::vector<std::pair<std::size_t, std::size_t>> target(parent.size(),
                                                          {kNone, 0});
  for (std::size_t r = 0; r < rings.size(); ++r) {
    if (joined[r]) continue;
    for (std::size_t b = 0; b < rings[r].size(); ++b) {
      target[index_of(rings[r][b])] = {r, b};
    }
  }
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const GridPoint cur = queue[head];
    const std::size_t ck = index_of(cur);
    for (const GridPoint& next : foreground) {
      const std::size_t nk = index_of(next);
      if (seen[nk] || !primitive_step(cur, next)) continue;
      seen[nk] = 1;
      parent[nk] = ck;
      origin[nk] = origin[ck];
      if (target[nk].first != kNone) {
        std::vector<GridPoint> via;
        for (std::size_t k = ck; parent[k] != kNone; k = parent[k]) {
          via.push_back({static_cast<int>(k % roi.width) + roi.x,
                         static_cast<int>(k / roi.width) + roi.y});
        }
        std::reverse(via.begin(), via.end());
        child = target[nk].first;
        return Bridge{origin[nk].ring, origin[nk].vertex, std::move(via),
                      target[nk].second, 0};
      }
      queue.push_back(next);
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Polygon> mask_to_polygon(const BinaryMask& mask) {
  std::vector<std::vector<GridPoint>> rings;
  {
    const auto contours = mask_to_contours(mask);
    for (const auto& c : contours) {
      std::vector<GridPoint> r;
      for (const auto& p : c.points) {
        r.push_back({static_cast<int>(p.x), static_cast<int>(p.y)});
      }
      rings.push_back(std::move(r));
    }
  }
  if (rings.size() == 1) return to_polygon(rings[0]);

  const std::size_t n = rings.size();
  std::vector<bool> joined(n, false);
  joined[0] = true;
  std::vector<std::vector<std::vector<Attachment>>> attach(n);
  for (std::size_t r = 0; r < n; ++r) attach[r].resize(rings[r].size());

  std::vector<GridPoint> foreground;  // lazily filled for two-hop bridges

  for (std::size_t step = 1; step < n; ++step) {
    std::optional<Bridge> best;
    std::size_t best_child = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (joined[c]) continue;
      for (std::size_t r = 0; r < n; ++r) {
        if (!joined[r]) continue;
        for (std::size_t a = 0; a < rings[r].size(); ++a) {
          for (std::size_t b = 0; b < rings[c].size(); ++b) {
            const GridPoint& pa = rings[r][a];
            const GridPoint& pb = rings[c][b];
            if (!primitive_step(pa, pb)) continue;
            const long long cost = dist2(pa, pb);
            if (!best || cost < best->cost) {
              best = Bridge{r, a, {}, b, cost};
              best_child = c;
            }
          }
        }
      }
    }
    if (!best) {
      best = route_through_foreground(mask, rings, joined, foreground,
                                      best_child);
      if (!best) return std::nullopt;
    }
    attach[best->ring][best->vertex].push_back(
        {std::move(best->via), best_child, best->child_vertex});
    joined[best_child] = true;
  }

  std::vector<GridPoint> seq;
  auto emit = [&](auto&& self, std::size_t r, std::size_t start) -> void {
    const auto& ring = rings[r];
    const std::size_t m = ring.size();
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t v = (start + k) % m;
      seq.push_back(ring[v]);
      for (const auto& att : attach[r][v]) {
        for (const auto& p : att.via) seq.push_back(p);
        self(self, att.child, att.child_vertex);
        for (auto it = att.via.rbegin(); it != att.via.rend(); ++it) {
          seq.push_back(*it);
        }
        seq.push_back(ring[v]);
      }
    }
    seq.push_back(ring[start]);
  };
  emit(emit, 0, 0);
  seq.pop_back();

  std::vector<GridPoint> dedup;
  for (const auto& p : seq) {
    if (dedup.empty() || !(dedup.back() == p)) dedup.push_back(p);
  }
  while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
  return to_polygon(dedup);
}

}  // namespace segkit
