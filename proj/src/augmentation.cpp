#include "segkit/augmentation.hpp"

#include <cmath>
#include <numbers>
#include <type_traits>
#include <string>

#include "segkit/colorspace.hpp"
#include "segkit/error.hpp"

namespace segkit::aug {

using nlohmann::json;

namespace {

std::uint8_t to_byte(double v) {
  v = std::round(v);
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v);
}

void require_rgb(const Raster& image, const char* what) {
  if (image.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " expects a 3-channel image");
  }
}

// Bilinear sample with edge clamping; (sx, sy) must round into the image.
void sample_bilinear(const Raster& img, double sx, double sy, std::uint8_t* out) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  sx = std::clamp(sx, 0.0, w - 1.0);
  sy = std::clamp(sy, 0.0, h - 1.0);
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = sx - x0, fy = sy - y0;
  const std::uint8_t* r0 = img.row(y0);
  const std::uint8_t* r1 = img.row(y1);
  for (int c = 0; c < ch; ++c) {
    const double top = r0[x0 * ch + c] * (1.0 - fx) + r0[x1 * ch + c] * fx;
    const double bot = r1[x0 * ch + c] * (1.0 - fx) + r1[x1 * ch + c] * fx;
    out[c] = to_byte(top * (1.0 - fy) + bot * fy);
  }
}

// Nearest-neighbor lookup; false outside the frame.
bool sample_nearest(const BinaryMask& m, double sx, double sy) {
  const double xr = std::round(sx), yr = std::round(sy);
  if (xr < 0 || yr < 0 || xr >= m.width() || yr >= m.height()) return false;
  return m.at(static_cast<int>(xr), static_cast<int>(yr));
}

constexpr std::int64_t kFixedOne = std::int64_t{1} << 32;
constexpr std::int64_t kFixedHalf = kFixedOne / 2;

std::int64_t to_fixed(double v) { return std::llround(v * static_cast<double>(kFixedOne)); }

bool in_frame(double sx, double sy, int w, int h) {
  const double xr = std::round(sx), yr = std::round(sy);
  return xr >= 0 && yr >= 0 && xr < w && yr < h;
}

// Crops patch and alpha to the alpha's bounds. An empty alpha is returned
// as-is so callers can detect it.
Cutout tighten(Raster patch, BinaryMask alpha, const Cutout& like) {
  const Rect box = alpha.bounds();
  Cutout out;
  out.kind = like.kind;
  out.source_id = like.source_id;
  if (box.empty() || (box.x == 0 && box.y == 0 && box.width == patch.width() &&
                      box.height == patch.height())) {
    out.patch = std::move(patch);
    out.alpha = std::move(alpha);
    return out;
  }
  Raster cropped(box.width, box.height, 3);
  for (int y = 0; y < box.height; ++y) {
    const std::uint8_t* src = patch.row(box.y + y) + box.x * 3;
    std::copy(src, src + box.width * 3, cropped.row(y));
  }
  out.patch = std::move(cropped);
  out.alpha = crop_to_bounds(alpha);
  return out;
}

struct Trig {
  double cos;
  double sin;
};

// Exact values on right angles keep those rotations pure permutations.
Trig exact_trig(double degrees) {
  double d = std::fmod(degrees, 360.0);
  if (d < 0) d += 360.0;
  if (d == 0.0) return {1.0, 0.0};
  if (d == 90.0) return {0.0, 1.0};
  if (d == 180.0) return {-1.0, 0.0};
  if (d == 270.0) return {0.0, -1.0};
  const double rad = d * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::Config,
                std::string(name) + " must be a probability in [0,1]");
  }
}

}  // namespace

void AugmentationSpec::validate() const {
  const auto& s = spatial;
  const auto& p = pixel;
  check_probability(s.flip_p, "flip_p");
  check_probability(s.rotation_p, "rotation_p");
  check_probability(s.elastic_p, "elastic_p");
  check_probability(p.jitter_p, "jitter_p");
  check_probability(p.shuffle_p, "shuffle_p");
  check_probability(p.dropout_p, "dropout_p");
  check_probability(p.solarize_p, "solarize_p");
  check_probability(p.blur_p, "blur_p");
  check_probability(p.noise_p, "noise_p");
  auto fail = [](const std::string& why) { throw Error(ErrorCode::Config, why); };
  if (s.rotation && !(s.max_degrees > 0.0 && s.max_degrees <= 360.0)) {
    fail("max_degrees must be in (0, 360]");
  }
  if (s.elastic && (s.elastic_grid < 2 || !(s.elastic_magnitude >= 0.0))) {
    fail("elastic_grid must be >= 2 and elastic_magnitude >= 0");
  }
  if (p.color_jitter) {
    for (double v : {p.brightness, p.contrast, p.saturation}) {
      if (!(v > 0.0 && v < 1.0)) fail("jitter ranges must be in (0, 1)");
    }
  }
  if (p.solarize && (p.solarize_threshold < 0 || p.solarize_threshold > 256)) {
    fail("solarize_threshold must be in [0, 256]");
  }
  if (p.blur && (p.blur_max_kernel < 3 || p.blur_max_kernel % 2 == 0)) {
    fail("blur_max_kernel must be odd and >= 3");
  }
  if (p.noise && !(p.noise_sigma > 0.0)) fail("noise_sigma must be positive");
}

json to_json(const AugmentationSpec& spec) {
  const auto& s = spec.spatial;
  const auto& p = spec.pixel;
  return {
      {"spatial",
       {{"flip", s.flip}, {"flip_p", s.flip_p}, {"rotation", s.rotation},
        {"rotation_p", s.rotation_p}, {"max_degrees", s.max_degrees},
        {"elastic", s.elastic}, {"elastic_p", s.elastic_p},
        {"elastic_grid", s.elastic_grid},
        {"elastic_magnitude", s.elastic_magnitude}}},
      {"pixel",
       {{"color_jitter", p.color_jitter}, {"jitter_p", p.jitter_p},
        {"brightness", p.brightness}, {"contrast", p.contrast},
        {"saturation", p.saturation}, {"channel_shuffle", p.channel_shuffle},
        {"shuffle_p", p.shuffle_p}, {"channel_dropout", p.channel_dropout},
        {"dropout_p", p.dropout_p}, {"solarize", p.solarize},
        {"solarize_p", p.solarize_p},
        {"solarize_threshold", p.solarize_threshold}, {"blur", p.blur},
        {"blur_p", p.blur_p}, {"blur_max_kernel", p.blur_max_kernel},
        {"noise", p.noise}, {"noise_p", p.noise_p},
        {"noise_sigma", p.noise_sigma}}},
      {"stream", spec.stream},
  };
}

namespace {

template <typename T>
void read_field(const json& obj, const std::string& section, const char* key,
                T& field) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Config,
                "augmentation field " + section + "." + key + " has the wrong type");
  }
}

void reject_unknown(const json& obj, const std::string& section,
                    std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) {
      throw Error(ErrorCode::Config,
                  "unknown augmentation field " + section + "." + key);
    }
  }
}

}  // namespace

AugmentationSpec augmentation_from_json(const json& doc) {
  AugmentationSpec spec;
  if (!doc.is_object()) throw Error(ErrorCode::Config, "augmentation must be an object");
  reject_unknown(doc, "augmentation", {"spatial", "pixel", "stream"});
  read_field(doc, "augmentation", "stream", spec.stream);
  if (const auto it = doc.find("spatial"); it != doc.end()) {
    const json& s = *it;
    auto& o = spec.spatial;
    reject_unknown(s, "spatial",
                   {"flip", "flip_p", "rotation", "rotation_p", "max_degrees",
                    "elastic", "elastic_p", "elastic_grid", "elastic_magnitude"});
    read_field(s, "spatial", "flip", o.flip);
    read_field(s, "spatial", "flip_p", o.flip_p);
    read_field(s, "spatial", "rotation", o.rotation);
    read_field(s, "spatial", "rotation_p", o.rotation_p);
    read_field(s, "spatial", "max_degrees", o.max_degrees);
    read_field(s, "spatial", "elastic", o.elastic);
    read_field(s, "spatial", "elastic_p", o.elastic_p);
    read_field(s, "spatial", "elastic_grid", o.elastic_grid);
    read_field(s, "spatial", "elastic_magnitude", o.elastic_magnitude);
  }
  if (const auto it = doc.find("pixel"); it != doc.end()) {
    const json& p = *it;
    auto& o = spec.pixel;
    reject_unknown(p, "pixel",
                   {"color_jitter", "jitter_p", "brightness", "contrast",
                    "saturation", "channel_shuffle", "shuffle_p",
                    "channel_dropout", "dropout_p", "solarize", "solarize_p",
                    "solarize_threshold", "blur", "blur_p", "blur_max_kernel",
                    "noise", "noise_p", "noise_sigma"});
    read_field(p, "pixel", "color_jitter", o.color_jitter);
    read_field(p, "pixel", "jitter_p", o.jitter_p);
    read_field(p, "pixel", "brightness", o.brightness);
    read_field(p, "pixel", "contrast", o.contrast);
    read_field(p, "pixel", "saturation", o.saturation);
    read_field(p, "pixel", "channel_shuffle", o.channel_shuffle);
    read_field(p, "pixel", "shuffle_p", o.shuffle_p);
    read_field(p, "pixel", "channel_dropout", o.channel_dropout);
    read_field(p, "pixel", "dropout_p", o.dropout_p);
    read_field(p, "pixel", "solarize", o.solarize);
    read_field(p, "pixel", "solarize_p", o.solarize_p);
    read_field(p, "pixel", "solarize_threshold", o.solarize_threshold);
    read_field(p, "pixel", "blur", o.blur);
    read_field(p, "pixel", "blur_p", o.blur_p);
    read_field(p, "pixel", "blur_max_kernel", o.blur_max_kernel);
    read_field(p, "pixel", "noise", o.noise);
    read_field(p, "pixel", "noise_p", o.noise_p);
    read_field(p, "pixel", "noise_sigma", o.noise_sigma);
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Object-level
// ---------------------------------------------------------------------------

Cutout flip(const Cutout& cutout, FlipAxis axis) {
  const int w = cutout.patch.width(), h = cutout.patch.height();
  const bool fx = axis != FlipAxis::Vertical;
  const bool fy = axis != FlipAxis::Horizontal;
  Cutout out = cutout;
  out.alpha = BinaryMask(w, h, Rect{0, 0, w, h});
  for (int y = 0; y < h; ++y) {
    const int sy = fy ? h - 1 - y : y;
    for (int x = 0; x < w; ++x) {
      const int sx = fx ? w - 1 - x : x;
      for (int c = 0; c < 3; ++c) out.patch.at(x, y, c) = cutout.patch.at(sx, sy, c);
      out.alpha.set(x, y, cutout.alpha.at(sx, sy));
    }
  }
  return out;
}

Cutout rotate_cutout(const Cutout& cutout, double degrees) {
  const int w = cutout.patch.width(), h = cutout.patch.height();
  const Trig t = exact_trig(degrees);
  const int out_w = std::max(
      1, static_cast<int>(std::ceil(std::abs(w * t.cos) + std::abs(h * t.sin) - 1e-9)));
  const int out_h = std::max(
      1, static_cast<int>(std::ceil(std::abs(w * t.sin) + std::abs(h * t.cos) - 1e-9)));
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double ocx = (out_w - 1) / 2.0, ocy = (out_h - 1) / 2.0;
  Raster patch(out_w, out_h, 3);
  BinaryMask alpha(out_w, out_h, Rect{0, 0, out_w, out_h});
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double u = x - ocx, v = y - ocy;
      const double sx = u * t.cos + v * t.sin + cx;
      const double sy = -u * t.sin + v * t.cos + cy;
      if (!in_frame(sx, sy, w, h)) continue;
      if (!sample_nearest(cutout.alpha, sx, sy)) continue;
      alpha.set(x, y, true);
      sample_bilinear(cutout.patch, sx, sy, &patch.at(x, y, 0));
    }
  }
  return tighten(std::move(patch), std::move(alpha), cutout);
}

Cutout elastic_cutout(const Cutout& cutout, int grid, double magnitude,
                      Rng& rng) {
  const int w = cutout.patch.width(), h = cutout.patch.height();
  const int gx = (w - 1) / grid + 2;
  const int gy = (h - 1) / grid + 2;
  std::vector<double> dx(static_cast<std::size_t>(gx) * gy);
  std::vector<double> dy(dx.size());
  for (std::size_t i = 0; i < dx.size(); ++i) {
    dx[i] = magnitude * rng.normal();
    dy[i] = magnitude * rng.normal();
  }
  auto node = [&](const std::vector<double>& f, int i, int j) {
    return f[static_cast<std::size_t>(j) * gx + i];
  };
  Raster patch(w, h, 3);
  BinaryMask alpha(w, h, Rect{0, 0, w, h});
  for (int y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / grid;
    const int j = static_cast<int>(fy);
    const double ty = fy - j;
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / grid;
      const int i = static_cast<int>(fx);
      const double tx = fx - i;
      auto interp = [&](const std::vector<double>& f) {
        const double top = node(f, i, j) * (1 - tx) + node(f, i + 1, j) * tx;
        const double bot = node(f, i, j + 1) * (1 - tx) + node(f, i + 1, j + 1) * tx;
        return top * (1 - ty) + bot * ty;
      };
      const double sx = x + interp(dx);
      const double sy = y + interp(dy);
      if (!in_frame(sx, sy, w, h)) continue;
      if (!sample_nearest(cutout.alpha, sx, sy)) continue;
      alpha.set(x, y, true);
      sample_bilinear(cutout.patch, sx, sy, &patch.at(x, y, 0));
    }
  }
  return tighten(std::move(patch), std::move(alpha), cutout);
}

Cutout object_spatial_augment(const Cutout& cutout, const SpatialAugment& spec,
                              Rng& rng) {
  if (!spec.any()) return cutout;
  for (int attempt = 0; attempt < 3; ++attempt) {
    Cutout c = cutout;
    if (spec.flip && rng.bernoulli(spec.flip_p)) {
      c = flip(c, static_cast<FlipAxis>(rng.uniform_int(0, 2)));
    }
    if (spec.rotation && rng.bernoulli(spec.rotation_p)) {
      c = rotate_cutout(c, rng.uniform(-spec.max_degrees, spec.max_degrees));
    }
    if (spec.elastic && rng.bernoulli(spec.elastic_p)) {
      c = elastic_cutout(c, spec.elastic_grid, spec.elastic_magnitude, rng);
    }
    if (c.alpha.any()) return c;
  }
  return cutout;
}

// ---------------------------------------------------------------------------
// Pixel-level
// ---------------------------------------------------------------------------

Raster color_jitter(const Raster& image, double brightness, double contrast,
                    double saturation) {
  require_rgb(image, "color_jitter");
  const auto src = image.data();
  const std::size_t n = src.size() / 3;
  std::vector<double> v(src.begin(), src.end());
  for (double& s : v) s *= brightness;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += 0.2125 * v[3 * i] + 0.7154 * v[3 * i + 1] + 0.0721 * v[3 * i + 2];
  }
  mean /= static_cast<double>(n);
  for (double& s : v) s = (s - mean) * contrast + mean;
  Raster out(image.width(), image.height(), 3);
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double g =
        0.2125 * v[3 * i] + 0.7154 * v[3 * i + 1] + 0.0721 * v[3 * i + 2];
    for (int c = 0; c < 3; ++c) {
      dst[3 * i + c] = to_byte(g + (v[3 * i + c] - g) * saturation);
    }
  }
  return out;
}

Raster shuffle_channels(const Raster& image, const std::array<int, 3>& order) {
  require_rgb(image, "shuffle_channels");
  Raster out(image.width(), image.height(), 3);
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); i += 3) {
    for (int c = 0; c < 3; ++c) dst[i + c] = src[i + order[c]];
  }
  return out;
}

Raster drop_channel(const Raster& image, int channel) {
  require_rgb(image, "drop_channel");
  Raster out = image;
  auto dst = out.data();
  for (std::size_t i = static_cast<std::size_t>(channel); i < dst.size(); i += 3) {
    dst[i] = 0;
  }
  return out;
}

Raster solarize(const Raster& image, int threshold) {
  Raster out = image;
  for (auto& v : out.data()) {
    if (v >= threshold) v = static_cast<std::uint8_t>(255 - v);
  }
  return out;
}

Raster box_blur(const Raster& image, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorCode::InvalidInput, "blur kernel must be odd and positive");
  }
  const int w = image.width(), h = image.height(), ch = image.channels();
  const int r = kernel / 2;
  std::vector<int> horiz(static_cast<std::size_t>(w) * h * ch);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = image.row(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        int s = 0;
        for (int k = -r; k <= r; ++k) {
          s += row[std::clamp(x + k, 0, w - 1) * ch + c];
        }
        horiz[(static_cast<std::size_t>(y) * w + x) * ch + c] = s;
      }
    }
  }
  const int norm = kernel * kernel;
  Raster out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    std::uint8_t* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        int s = 0;
        for (int k = -r; k <= r; ++k) {
          s += horiz[(static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x) * ch + c];
        }
        dst[x * ch + c] = static_cast<std::uint8_t>((s + norm / 2) / norm);
      }
    }
  }
  return out;
}

Raster add_noise(const Raster& image, double sigma, Rng& rng) {
  Raster out = image;
  for (auto& v : out.data()) v = to_byte(v + sigma * rng.normal());
  return out;
}

Raster pixel_augment(const Raster& image, const PixelAugment& spec, Rng& rng) {
  require_rgb(image, "pixel_augment");
  Raster out = image;
  if (spec.color_jitter && rng.bernoulli(spec.jitter_p)) {
    const double b = rng.uniform(1.0 - spec.brightness, 1.0 + spec.brightness);
    const double c = rng.uniform(1.0 - spec.contrast, 1.0 + spec.contrast);
    const double s = rng.uniform(1.0 - spec.saturation, 1.0 + spec.saturation);
    out = color_jitter(out, b, c, s);
  }
  if (spec.channel_shuffle && rng.bernoulli(spec.shuffle_p)) {
    std::array<int, 3> order{0, 1, 2};
    for (int i = 2; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    }
    out = shuffle_channels(out, order);
  }
  if (spec.channel_dropout && rng.bernoulli(spec.dropout_p)) {
    out = drop_channel(out, static_cast<int>(rng.uniform_int(0, 2)));
  }
  if (spec.solarize && rng.bernoulli(spec.solarize_p)) {
    out = solarize(out, spec.solarize_threshold);
  }
  if (spec.blur && rng.bernoulli(spec.blur_p)) {
    const int steps = (spec.blur_max_kernel - 3) / 2;
    out = box_blur(out, 3 + 2 * static_cast<int>(rng.uniform_int(0, steps)));
  }
  if (spec.noise && rng.bernoulli(spec.noise_p)) {
    out = add_noise(out, spec.noise_sigma, rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole-frame rotation
// ---------------------------------------------------------------------------

std::pair<Raster, InstanceSet> rotate_pair(const Raster& image,
                                           const InstanceSet& instances,
                                           int degrees,
                                           const RotationDropRule& rule) {
  if (instances.width != image.width() || instances.height != image.height()) {
    throw Error(ErrorCode::ShapeMismatch,
                "instance set dimensions differ from the image");
  }
  degrees %= 360;
  if (degrees < 0) degrees += 360;
  if (degrees == 0) return {image, instances};

  const int w = image.width(), h = image.height(), ch = image.channels();
  const Trig t = exact_trig(degrees);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

  // Inverse map in 32.32 fixed point, stepped along each destination row.
  const std::int64_t step_x = to_fixed(t.cos), step_y = -to_fixed(t.sin);
  auto row_origin = [&](int y) {
    const double v = y - cy;
    return std::pair{to_fixed(-cx * t.cos + v * t.sin + cx),
                     to_fixed(cx * t.sin + v * t.cos + cy)};
  };
  const std::int64_t max_x = static_cast<std::int64_t>(w) * kFixedOne - kFixedHalf;
  const std::int64_t max_y = static_cast<std::int64_t>(h) * kFixedOne - kFixedHalf;
  const std::int64_t clamp_x = static_cast<std::int64_t>(w - 1) * kFixedOne;
  const std::int64_t clamp_y = static_cast<std::int64_t>(h - 1) * kFixedOne;

  Raster out(w, h, ch, 0);
  const auto rotate_rows = [&]<int C>(std::integral_constant<int, C>) {
    const int n = C > 0 ? C : ch;
    for (int y = 0; y < h; ++y) {
      auto [sx, sy] = row_origin(y);
      std::uint8_t* dst = out.row(y);
      for (int x = 0; x < w; ++x, sx += step_x, sy += step_y, dst += n) {
        if (sx <= -kFixedHalf || sy <= -kFixedHalf || sx >= max_x || sy >= max_y) continue;
        const std::int64_t qx = std::clamp<std::int64_t>(sx, 0, clamp_x);
        const std::int64_t qy = std::clamp<std::int64_t>(sy, 0, clamp_y);
        const int x0 = static_cast<int>(qx >> 32), y0 = static_cast<int>(qy >> 32);
        const int dx = x0 + 1 < w ? n : 0;
        const int fx = static_cast<int>((qx >> 24) & 255), fy = static_cast<int>((qy >> 24) & 255);
        const std::uint8_t* p0 = image.row(y0) + x0 * n;
        const std::uint8_t* p1 = y0 + 1 < h ? image.row(y0 + 1) + x0 * n : p0;
        for (int c = 0; c < n; ++c) {
          const int top = p0[c] * (256 - fx) + p0[c + dx] * fx;
          const int bot = p1[c] * (256 - fx) + p1[c + dx] * fx;
          dst[c] = static_cast<std::uint8_t>((top * (256 - fy) + bot * fy + 32768) >> 16);
        }
      }
    }
  };
  if (ch == 3) {
    rotate_rows(std::integral_constant<int, 3>{});
  } else {
    rotate_rows(std::integral_constant<int, 0>{});
  }

  InstanceSet rotated{instances.image_id, w, h, {}};
  for (const auto& inst : instances.instances) {
    const Rect src = inst.mask.roi();
    if (src.empty()) continue;
    // Forward-map the storage corners to bound the destination region.
    double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
    for (const double px : {src.x - 1.0, src.right() + 0.0}) {
      for (const double py : {src.y - 1.0, src.bottom() + 0.0}) {
        const double u = px - cx, vv = py - cy;
        const double dx = u * t.cos - vv * t.sin + cx;
        const double dy = u * t.sin + vv * t.cos + cy;
        min_x = std::min(min_x, dx);
        max_x = std::max(max_x, dx);
        min_y = std::min(min_y, dy);
        max_y = std::max(max_y, dy);
      }
    }
    const int x0 = static_cast<int>(std::floor(min_x)) - 1;
    const int y0 = static_cast<int>(std::floor(min_y)) - 1;
    const int x1 = static_cast<int>(std::ceil(max_x)) + 1;
    const int y1 = static_cast<int>(std::ceil(max_y)) + 1;
    BinaryMask mask(w, h, Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1});
    const Rect roi = mask.roi();
    for (int y = roi.y; y < roi.bottom(); ++y) {
      auto [sx, sy] = row_origin(y);
      sx += roi.x * step_x;
      sy += roi.x * step_y;
      std::uint8_t* bits = mask.roi_row(y);
      for (int x = roi.x; x < roi.right(); ++x, sx += step_x, sy += step_y) {
        if (sx <= -kFixedHalf || sy <= -kFixedHalf) continue;
        const int nx = static_cast<int>((sx + kFixedHalf) >> 32);
        const int ny = static_cast<int>((sy + kFixedHalf) >> 32);
        if (src.contains(nx, ny) && inst.mask.roi_row(ny)[nx - src.x]) bits[x - roi.x] = 1;
      }
    }
    const std::int64_t before = inst.mask.count();
    const std::int64_t after = mask.count();
    if (after < rule.min_pixels ||
        static_cast<double>(after) < rule.min_fraction * static_cast<double>(before)) {
      continue;
    }
    InstanceAnnotation r = inst;
    r.mask = mask.tightened();
    rotated.instances.push_back(std::move(r));
  }
  return {std::move(out), std::move(rotated)};
}

}  // namespace segkit::aug
