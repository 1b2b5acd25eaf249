#pragma once

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iterator>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "segkit/cutout.hpp"
#include "segkit/png_io.hpp"
#include "segkit/raster.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "segkit") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline segkit::BinaryMask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
  segkit::BinaryMask m(w, h, segkit::Rect{0, 0, w, h});
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) m.set(x, y, true);
  }
  return m.tightened();
}

inline segkit::BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
  segkit::BinaryMask m(w, h, segkit::Rect{0, 0, w, h});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
    }
  }
  return m.tightened();
}

inline segkit::BinaryMask random_mask(int w, int h, std::mt19937_64& gen, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  segkit::BinaryMask m(w, h, segkit::Rect{0, 0, w, h});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, coin(gen));
  }
  return m;
}

inline segkit::Raster random_rgb(int w, int h, std::mt19937_64& gen) {
  segkit::Raster r(w, h, 3);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : r.data()) v = static_cast<std::uint8_t>(d(gen));
  return r;
}

// A textured frame with `n` elliptical "heads" of varied size; the masks
// are disjoint.
struct Frame {
  segkit::Raster image;
  segkit::InstanceSet instances;
};

inline Frame make_frame(const std::string& id, int w, int h, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Frame f;
  f.image = segkit::Raster(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.image.at(x, y, 0) = static_cast<std::uint8_t>(60 + (x * 7 + y * 3) % 50);
      f.image.at(x, y, 1) = static_cast<std::uint8_t>(90 + (x * 5) % 40);
      f.image.at(x, y, 2) = static_cast<std::uint8_t>(30 + (y * 11) % 30);
    }
  }
  f.instances = {id, w, h, {}};
  std::vector<std::uint8_t> taken(static_cast<std::size_t>(w) * h, 0);
  std::uniform_real_distribution<double> U(0, 1);
  int id_next = 1;
  for (int attempt = 0; attempt < n * 20 && id_next <= n; ++attempt) {
    const double rx = 3 + U(gen) * 10, ry = 3 + U(gen) * 6;
    const double cx = rx + U(gen) * (w - 2 * rx - 1), cy = ry + U(gen) * (h - 2 * ry - 1);
    segkit::BinaryMask m(w, h, segkit::Rect{0, 0, w, h});
    bool clash = false;
    for (int y = 0; y < h && !clash; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy > 1) continue;
        if (taken[static_cast<std::size_t>(y) * w + x]) {
          clash = true;
          break;
        }
        m.set(x, y, true);
      }
    }
    if (clash || m.count() < 9) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!m.at(x, y)) continue;
        taken[static_cast<std::size_t>(y) * w + x] = 1;
        f.image.at(x, y, 0) = static_cast<std::uint8_t>(200 - id_next % 40);
        f.image.at(x, y, 1) = static_cast<std::uint8_t>(170 + (x % 20));
        f.image.at(x, y, 2) = static_cast<std::uint8_t>(60 + (y % 30));
      }
    }
    f.instances.instances.push_back({id_next++, 0, m.tightened(), std::nullopt});
  }
  return f;
}

inline segkit::Cutout solid_cutout(int w, int h, std::uint8_t value, const std::string& id,
                                   segkit::CutoutKind kind = segkit::CutoutKind::Real) {
  segkit::Cutout c;
  c.patch = segkit::Raster(w, h, 3, value);
  c.alpha = segkit::BinaryMask(w, h, segkit::Rect{0, 0, w, h});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) c.alpha.set(x, y, true);
  }
  c.kind = kind;
  c.source_id = id;
  return c;
}

// Pixelwise disjointness of every pair of instance masks.
inline bool pairwise_disjoint(const segkit::InstanceSet& s) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(s.width) * s.height, 0);
  for (const auto& inst : s.instances) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (!inst.mask.at(x, y)) continue;
        auto& v = seen[static_cast<std::size_t>(y) * s.width + x];
        if (v) return false;
        v = 1;
      }
    }
  }
  return true;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing
