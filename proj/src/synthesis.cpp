#include "segkit/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "segkit/contour.hpp"
#include "segkit/error.hpp"
#include "segkit/parallel.hpp"
#include "segkit/png_io.hpp"
#include "segkit/rng.hpp"

namespace segkit::synth {

using nlohmann::json;

std::vector<Cutout> extract_cutouts(const Raster& image,
                                    const InstanceSet& annotations,
                                    CutoutKind kind) {
  if (image.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "cutout source must be an RGB image");
  }
  if (annotations.width != image.width() || annotations.height != image.height()) {
    throw Error(ErrorCode::ShapeMismatch,
                "annotations of '" + annotations.image_id +
                    "' differ in size from the image");
  }
  std::vector<Cutout> out;
  out.reserve(annotations.instances.size());
  for (const auto& inst : annotations.instances) {
    const Rect box = inst.mask.bounds();
    if (box.empty()) {
      throw Error(ErrorCode::EmptyMask, "instance " + std::to_string(inst.id) +
                                            " of '" + annotations.image_id +
                                            "' has an empty mask");
    }
    Cutout c;
    c.kind = kind;
    c.source_id = annotations.image_id + "#" + std::to_string(inst.id);
    c.patch = Raster(box.width, box.height, 3);
    for (int y = 0; y < box.height; ++y) {
      const std::uint8_t* src = image.row(box.y + y) + box.x * 3;
      std::copy(src, src + box.width * 3, c.patch.row(y));
    }
    c.alpha = crop_to_bounds(inst.mask);
    out.push_back(std::move(c));
  }
  return out;
}

SizePartition partition_by_size(std::vector<Cutout> cutouts) {
  if (cutouts.size() < 2) {
    throw Error(ErrorCode::InsufficientPool,
                "size partition needs at least 2 cutouts, got " +
                    std::to_string(cutouts.size()));
  }
  std::stable_sort(cutouts.begin(), cutouts.end(),
                   [](const Cutout& a, const Cutout& b) {
                     return a.max_dim() > b.max_dim();
                   });
  const std::size_t n_large = (cutouts.size() + 1) / 2;
  SizePartition p;
  p.large.assign(std::make_move_iterator(cutouts.begin()),
                 std::make_move_iterator(cutouts.begin() + n_large));
  p.small.assign(std::make_move_iterator(cutouts.begin() + n_large),
                 std::make_move_iterator(cutouts.end()));
  return p;
}

void SynthesisConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::Config, why); };
  if (n_samples < 0) fail("n_samples must be >= 0");
  if (width < 1 || height < 1) fail("output width and height must be positive");
  if (overlay_min < 0) fail("overlay_min must be >= 0");
  if (!(overlay_min <= pool_switch && pool_switch <= overlay_max)) {
    fail("overlay counts must satisfy overlay_min <= pool_switch <= overlay_max (got " +
         std::to_string(overlay_min) + ", " + std::to_string(pool_switch) + ", " +
         std::to_string(overlay_max) + ")");
  }
  if (!(visibility_threshold > 0.0 && visibility_threshold <= 1.0)) {
    fail("visibility_threshold must be in (0, 1]");
  }
  if (!(scale_jitter >= 0.0 && scale_jitter < 1.0)) {
    fail("scale_jitter must be in [0, 1)");
  }
  if (forced_overlay_count && *forced_overlay_count < 0) {
    fail("forced_overlay_count must be >= 0");
  }
  augmentation.validate();
}

json to_json(const SynthesisConfig& c) {
  json j = {
      {"n_samples", c.n_samples},
      {"overlay_min", c.overlay_min},
      {"overlay_max", c.overlay_max},
      {"pool_switch", c.pool_switch},
      {"visibility_threshold", c.visibility_threshold},
      {"master_seed", c.master_seed},
      {"width", c.width},
      {"height", c.height},
      {"annotate_fakes", c.annotate_fakes},
      {"feather", c.feather},
      {"scale_jitter", c.scale_jitter},
      {"augmentation", aug::to_json(c.augmentation)},
  };
  j["forced_overlay_count"] =
      c.forced_overlay_count ? json(*c.forced_overlay_count) : json(nullptr);
  return j;
}

namespace {

template <typename T>
void read_field(const json& doc, const char* key, T& field) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Config,
                std::string("synthesis field ") + key + " has the wrong type");
  }
}

}  // namespace

SynthesisConfig synthesis_config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::Config, "synthesis config must be an object");
  static const char* const kKeys[] = {
      "n_samples",   "overlay_min",    "overlay_max", "pool_switch",
      "visibility_threshold", "master_seed", "width", "height",
      "annotate_fakes", "feather", "scale_jitter", "augmentation",
      "forced_overlay_count"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw Error(ErrorCode::Config, "unknown synthesis field " + key);
    }
  }
  SynthesisConfig c;
  read_field(doc, "n_samples", c.n_samples);
  read_field(doc, "overlay_min", c.overlay_min);
  read_field(doc, "overlay_max", c.overlay_max);
  read_field(doc, "pool_switch", c.pool_switch);
  read_field(doc, "visibility_threshold", c.visibility_threshold);
  read_field(doc, "master_seed", c.master_seed);
  read_field(doc, "width", c.width);
  read_field(doc, "height", c.height);
  read_field(doc, "annotate_fakes", c.annotate_fakes);
  read_field(doc, "feather", c.feather);
  read_field(doc, "scale_jitter", c.scale_jitter);
  if (const auto it = doc.find("augmentation"); it != doc.end()) {
    c.augmentation = aug::augmentation_from_json(*it);
  }
  if (const auto it = doc.find("forced_overlay_count");
      it != doc.end() && !it->is_null()) {
    int n = 0;
    read_field(doc, "forced_overlay_count", n);
    c.forced_overlay_count = n;
  }
  c.validate();
  return c;
}

CompositeResult composite(Raster& canvas, const std::vector<Paste>& pastes,
                          double visibility_threshold, bool feather) {
  const int W = canvas.width(), H = canvas.height();
  if (canvas.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "composite canvas must be RGB");
  }
  std::vector<std::int32_t> owner(static_cast<std::size_t>(W) * H, -1);
  CompositeResult res;
  res.pasted.assign(pastes.size(), 0);
  res.visible.assign(pastes.size(), 0);
  res.instance_ids.assign(pastes.size(), 0);
  const Rect frame{0, 0, W, H};

  for (std::size_t k = 0; k < pastes.size(); ++k) {
    const Paste& p = pastes[k];
    const Cutout& c = *p.cutout;
    const int cw = c.patch.width(), ch = c.patch.height();
    const Rect on = intersect(Rect{p.x, p.y, cw, ch}, frame);
    for (int y = on.y; y < on.bottom(); ++y) {
      const int ly = y - p.y;
      std::uint8_t* dst = canvas.row(y);
      const std::uint8_t* src = c.patch.row(ly);
      for (int x = on.x; x < on.right(); ++x) {
        const int lx = x - p.x;
        if (!c.alpha.at(lx, ly)) continue;
        ++res.pasted[k];
        owner[static_cast<std::size_t>(y) * W + x] = static_cast<std::int32_t>(k);
        const bool rim = feather && (!c.alpha.at(lx - 1, ly) || !c.alpha.at(lx + 1, ly) ||
                                     !c.alpha.at(lx, ly - 1) || !c.alpha.at(lx, ly + 1));
        for (int j = 0; j < 3; ++j) {
          const std::uint8_t v = src[lx * 3 + j];
          dst[x * 3 + j] =
              rim ? static_cast<std::uint8_t>((dst[x * 3 + j] + v + 1) / 2) : v;
        }
      }
    }
  }
  for (const std::int32_t o : owner) {
    if (o >= 0) ++res.visible[static_cast<std::size_t>(o)];
  }

  res.instances.width = W;
  res.instances.height = H;
  int next_id = 1;
  for (std::size_t k = 0; k < pastes.size(); ++k) {
    const Paste& p = pastes[k];
    if (!p.annotated || res.visible[k] == 0) continue;
    if (static_cast<double>(res.visible[k]) <
        visibility_threshold * static_cast<double>(res.pasted[k])) {
      continue;
    }
    const Rect on = intersect(
        Rect{p.x, p.y, p.cutout->patch.width(), p.cutout->patch.height()}, frame);
    BinaryMask mask(W, H, on);
    for (int y = on.y; y < on.bottom(); ++y) {
      const std::int32_t* row = owner.data() + static_cast<std::size_t>(y) * W;
      for (int x = on.x; x < on.right(); ++x) {
        if (row[x] == static_cast<std::int32_t>(k)) mask.set(x, y, true);
      }
    }
    InstanceAnnotation inst;
    inst.id = next_id++;
    inst.class_id = 0;
    inst.mask = mask.tightened();
    res.instance_ids[k] = inst.id;
    res.instances.instances.push_back(std::move(inst));
  }
  return res;
}

namespace {

// Nearest alpha and bilinear patch resampling to round(dims * scale).
Cutout rescale(const Cutout& c, double scale) {
  const int w = c.patch.width(), h = c.patch.height();
  const int nw = std::max(1, static_cast<int>(std::lround(w * scale)));
  const int nh = std::max(1, static_cast<int>(std::lround(h * scale)));
  if (nw == w && nh == h) return c;
  const double sx = static_cast<double>(w) / nw, sy = static_cast<double>(h) / nh;
  Cutout out;
  out.kind = c.kind;
  out.source_id = c.source_id;
  out.patch = Raster(nw, nh, 3);
  BinaryMask alpha(nw, nh, Rect{0, 0, nw, nh});
  for (int y = 0; y < nh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - y0;
    const int ny = std::min(h - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < nw; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      const int nx = std::min(w - 1, static_cast<int>((x + 0.5) * sx));
      alpha.set(x, y, c.alpha.at(nx, ny));
      for (int j = 0; j < 3; ++j) {
        const double top = c.patch.at(x0, y0, j) * (1 - tx) + c.patch.at(x1, y0, j) * tx;
        const double bot = c.patch.at(x0, y1, j) * (1 - tx) + c.patch.at(x1, y1, j) * tx;
        out.patch.at(x, y, j) = static_cast<std::uint8_t>(
            std::clamp(std::round(top * (1 - ty) + bot * ty), 0.0, 255.0));
      }
    }
  }
  if (!alpha.any()) return c;
  out.alpha = std::move(alpha);
  return out;
}

// Uniform top-left position keeping at least half the cutout box on canvas.
std::pair<int, int> place(const Cutout& c, int W, int H, Rng& rng) {
  const std::int64_t w = c.patch.width(), h = c.patch.height();
  if (2 * std::min<std::int64_t>(w, W) * std::min<std::int64_t>(h, H) < w * h) {
    throw Error(ErrorCode::ShapeMismatch,
                "cutout " + c.source_id + " (" + std::to_string(w) + "x" +
                    std::to_string(h) + ") cannot keep half its box on a " +
                    std::to_string(W) + "x" + std::to_string(H) + " canvas");
  }
  for (;;) {
    const auto x = rng.uniform_int(-(w - 1), W - 1);
    const auto y = rng.uniform_int(-(h - 1), H - 1);
    const std::int64_t ow = std::min<std::int64_t>(x + w, W) - std::max<std::int64_t>(x, 0);
    const std::int64_t oh = std::min<std::int64_t>(y + h, H) - std::max<std::int64_t>(y, 0);
    if (2 * ow * oh >= w * h) return {static_cast<int>(x), static_cast<int>(y)};
  }
}

}  // namespace

SynthesizedSample synthesize_sample(const Raster& background,
                                    const std::vector<Cutout>& fake_pool,
                                    const std::vector<Cutout>& real_large,
                                    const std::vector<Cutout>& real_small,
                                    const SynthesisConfig& config,
                                    std::uint64_t sample_seed) {
  config.validate();
  if (fake_pool.empty() || real_large.empty() || real_small.empty()) {
    throw Error(ErrorCode::InsufficientPool,
                "fake, large and small cutout pools must all be non-empty");
  }
  const int W = config.width, H = config.height;
  if (background.channels() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "background must be an RGB image");
  }
  if (background.width() < W || background.height() < H) {
    throw Error(ErrorCode::ShapeMismatch,
                "background " + std::to_string(background.width()) + "x" +
                    std::to_string(background.height()) +
                    " is smaller than the output " + std::to_string(W) + "x" +
                    std::to_string(H));
  }

  Rng rng(sample_seed);
  Rng aug_rng(derive_seed(sample_seed, 0, 2 + config.augmentation.stream));
  SynthesizedSample s;
  s.seed = sample_seed;
  s.crop = Rect{static_cast<int>(rng.uniform_int(0, background.width() - W)),
                static_cast<int>(rng.uniform_int(0, background.height() - H)), W, H};
  s.image = Raster(W, H, 3);
  for (int y = 0; y < H; ++y) {
    const std::uint8_t* src = background.row(s.crop.y + y) + s.crop.x * 3;
    std::copy(src, src + W * 3, s.image.row(y));
  }

  const int n = config.forced_overlay_count
                    ? *config.forced_overlay_count
                    : static_cast<int>(rng.uniform_int(config.overlay_min, config.overlay_max));
  s.overlay_count = n;
  const bool use_large = n <= config.pool_switch;
  const auto& reals = use_large ? real_large : real_small;

  std::vector<Cutout> prepared;
  prepared.reserve(2 * static_cast<std::size_t>(n));
  std::vector<Paste> pastes;
  auto add = [&](const std::vector<Cutout>& pool, PoolKind kind, bool annotated) {
    const auto idx = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
    Cutout c = aug::object_spatial_augment(pool[idx], config.augmentation.spatial, aug_rng);
    if (config.scale_jitter > 0.0) {
      c = rescale(c, rng.uniform(1.0 - config.scale_jitter, 1.0 + config.scale_jitter));
    }
    const auto [x, y] = place(c, W, H, rng);
    Placement pl;
    pl.pool = kind;
    pl.index = idx;
    pl.source_id = c.source_id;
    pl.x = x;
    pl.y = y;
    s.placements.push_back(std::move(pl));
    prepared.push_back(std::move(c));
    pastes.push_back({&prepared.back(), x, y, annotated});
  };
  for (int i = 0; i < n; ++i) add(fake_pool, PoolKind::Fake, config.annotate_fakes);
  for (int i = 0; i < n; ++i) {
    add(reals, use_large ? PoolKind::RealLarge : PoolKind::RealSmall, true);
  }

  CompositeResult res =
      composite(s.image, pastes, config.visibility_threshold, config.feather);
  std::vector<int> unencodable;
  std::erase_if(res.instances.instances, [&](const InstanceAnnotation& inst) {
    if (mask_to_polygon(inst.mask)) return false;
    unencodable.push_back(inst.id);
    return true;
  });
  for (std::size_t k = 0; k < pastes.size(); ++k) {
    auto& pl = s.placements[k];
    pl.pasted_pixels = res.pasted[k];
    pl.visible_pixels = res.visible[k];
    pl.instance_id = res.instance_ids[k];
    if (std::find(unencodable.begin(), unencodable.end(), pl.instance_id) !=
        unencodable.end()) {
      pl.instance_id = 0;
    }
  }
  s.instances = std::move(res.instances);
  if (config.augmentation.pixel.any()) {
    s.image = aug::pixel_augment(s.image, config.augmentation.pixel, aug_rng);
  }
  s.semantic_mask = union_mask(s.instances);
  return s;
}

namespace {

Raster to_rgb(Raster img) {
  if (img.channels() == 3) return img;
  Raster out(img.width(), img.height(), 3);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

}  // namespace

io::DatasetManifest synthesize_dataset(const SynthesisInputs& inputs,
                                       const SynthesisConfig& config,
                                       const fs::path& out_dir,
                                       const DatasetOptions& options) {
  config.validate();
  if (inputs.backgrounds.empty()) {
    throw Error(ErrorCode::InvalidInput, "synthesis needs at least one background");
  }
  if (inputs.fakes.empty() || inputs.reals.large.empty() || inputs.reals.small.empty()) {
    throw Error(ErrorCode::InsufficientPool,
                "fake, large and small cutout pools must all be non-empty");
  }
  io::prepare_dataset_dirs(out_dir, options.write);

  const auto n = static_cast<std::size_t>(config.n_samples);
  std::vector<io::SampleEntry> entries(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(config.master_seed, i);
    Rng pick(derive_seed(config.master_seed, i, 1));
    const auto b = static_cast<std::size_t>(pick.uniform_int(
        0, static_cast<std::int64_t>(inputs.backgrounds.size()) - 1));
    const Raster background = to_rgb(io::read_png(inputs.backgrounds[b]));
    SynthesizedSample s = synthesize_sample(background, inputs.fakes,
                                            inputs.reals.large, inputs.reals.small,
                                            config, seed);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%06zu", i);
    const std::string id = options.name + buf;
    s.instances.image_id = id;
    io::SampleEntry e = io::write_sample(out_dir, id, s.image, s.instances, options.write);
    e.seed = seed;
    e.domain = options.domain;
    e.extra["overlay_count"] = s.overlay_count;
    e.extra["instance_count"] = s.instances.instances.size();
    e.extra["background"] = inputs.backgrounds[b].filename().string();
    entries[i] = std::move(e);
  });

  io::DatasetManifest m;
  m.name = options.name;
  m.role = options.role;
  json gen = options.provenance.is_object() ? options.provenance : json::object();
  gen["tool"] = "synth";
  gen["config"] = to_json(config);
  gen["domain"] = options.domain;
  gen["pools"] = {{"fake", inputs.fakes.size()},
                  {"real_large", inputs.reals.large.size()},
                  {"real_small", inputs.reals.small.size()},
                  {"backgrounds", inputs.backgrounds.size()}};
  m.generator = std::move(gen);
  m.samples = std::move(entries);
  io::write_manifest(m, out_dir / io::kManifestFile);
  return m;
}

}  // namespace segkit::synth
