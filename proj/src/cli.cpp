#include "segkit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <system_error>

#include <CLI11.hpp>
#include <json.hpp>

#include "segkit/colorspace.hpp"
#include "segkit/dataset.hpp"
#include "segkit/error.hpp"
#include "segkit/eval.hpp"
#include "segkit/labels_io.hpp"
#include "segkit/manifest.hpp"
#include "segkit/parallel.hpp"
#include "segkit/png_io.hpp"
#include "segkit/pseudo.hpp"
#include "segkit/rotation_dataset.hpp"
#include "segkit/synthesis.hpp"

namespace segkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON config files for CLI11. Top-level keys are global options, objects
// named after a subcommand hold that command's options. Keys may use
// underscores for dashes.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      input >> doc;
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
      throw CLI::ConversionError("config", "top level must be a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_null()) continue;
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = dashed(key);
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  int jobs = 1;
  bool json_output = false;
  bool quiet = false;

  void log(const std::string& msg) const {
    if (!quiet) err << "segkit: " << msg << "\n";
  }
  void summary(const json& doc, const std::string& text) const {
    if (json_output) {
      out << doc.dump(2) << "\n";
    } else {
      out << text;
    }
  }
};

void require_dir(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::is_directory(p, ec)) {
    throw Error(ErrorCode::Io, what + " directory '" + p.string() + "' not found");
  }
}

void require_file(const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw Error(ErrorCode::Io, what + " file '" + p.string() + "' not found");
  }
}

std::vector<std::string> stems_in(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out.push_back(e.path().stem().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) s += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) s += ", ...";
  return s;
}

std::string abs_string(const fs::path& p) {
  return fs::weakly_canonical(fs::absolute(p)).generic_string();
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string sources;
  std::string fakes;
  std::string backgrounds;
  std::string out;
  std::string augment;
  std::string manifest;
  std::string name = "synthetic";
  std::string role = "train";
  std::string domain;
  synth::SynthesisConfig config;
  int overlay_count = -1;
  bool no_instance_maps = false;
  int compression = io::kDefaultPngCompression;
};

std::vector<Cutout> load_cutouts(const fs::path& dir, CutoutKind kind,
                                 const Context& ctx) {
  std::vector<Cutout> all;
  const auto ids = io::list_image_ids(dir);
  for (const auto& id : ids) {
    const auto a = io::read_annotated(dir, id);
    auto c = synth::extract_cutouts(a.image, a.instances, kind);
    std::move(c.begin(), c.end(), std::back_inserter(all));
  }
  ctx.log("extracted " + std::to_string(all.size()) + " " +
          (kind == CutoutKind::Real ? "real" : "fake") + " cutouts from " +
          std::to_string(ids.size()) + " frames in " + dir.string());
  return all;
}

int cmd_synth(SynthArgs a, const Context& ctx) {
  if (!a.manifest.empty()) {
    const auto m = io::read_manifest(a.manifest);
    const json& g = m.generator;
    if (g.value("tool", "") != "synth") {
      throw Error(ErrorCode::Config,
                  "manifest '" + a.manifest + "' was not produced by synth");
    }
    try {
      a.config = synth::synthesis_config_from_json(g.at("config"));
      const json& src = g.at("sources");
      a.sources = src.at("sources").get<std::string>();
      a.fakes = src.at("fakes").get<std::string>();
      a.backgrounds = src.at("backgrounds").get<std::string>();
      const json& w = g.at("write");
      a.no_instance_maps = !w.at("instance_maps").get<bool>();
      a.compression = w.at("compression").get<int>();
      a.domain = g.value("domain", "");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Config, std::string("incomplete synth manifest: ") + e.what());
    }
    a.name = m.name;
    a.role = io::to_string(m.role);
  } else {
    if (!a.augment.empty()) {
      require_file(a.augment, "augmentation");
      json doc;
      try {
        doc = json::parse(io::read_text_file(a.augment));
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Config, "invalid augmentation JSON: " + std::string(e.what()));
      }
      a.config.augmentation = aug::augmentation_from_json(doc);
    }
    if (a.overlay_count >= 0) a.config.forced_overlay_count = a.overlay_count;
  }
  a.config.validate();
  io::DatasetRole role;
  try {
    role = io::parse_role(a.role);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  if (a.fakes.empty()) a.fakes = a.sources;
  require_dir(a.sources, "source");
  require_dir(a.fakes, "fake source");
  require_dir(a.backgrounds, "background");

  synth::SynthesisInputs inputs;
  for (const auto& id : stems_in(a.backgrounds, ".png")) {
    inputs.backgrounds.push_back(fs::path(a.backgrounds) / (id + ".png"));
  }
  if (inputs.backgrounds.empty()) {
    throw Error(ErrorCode::InvalidInput, "no PNG backgrounds in '" + a.backgrounds + "'");
  }
  inputs.reals = synth::partition_by_size(load_cutouts(a.sources, CutoutKind::Real, ctx));
  inputs.fakes = load_cutouts(a.fakes, CutoutKind::Fake, ctx);

  synth::DatasetOptions opt;
  opt.name = a.name;
  opt.role = role;
  opt.domain = a.domain;
  opt.jobs = ctx.jobs;
  opt.write.instance_map = !a.no_instance_maps;
  opt.write.compression = a.compression;
  opt.provenance = {
      {"sources",
       {{"sources", abs_string(a.sources)},
        {"fakes", abs_string(a.fakes)},
        {"backgrounds", abs_string(a.backgrounds)}}},
      {"write", {{"instance_maps", opt.write.instance_map},
                 {"compression", opt.write.compression}}},
      {"master_seed", a.config.master_seed},
  };

  const auto t0 = std::chrono::steady_clock::now();
  ctx.log("synthesizing " + std::to_string(a.config.n_samples) + " samples into " + a.out);
  const auto m = synth::synthesize_dataset(inputs, a.config, a.out, opt);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::map<int, int> histogram;  // bins of 10 instances
  std::int64_t total = 0;
  for (const auto& s : m.samples) {
    const int n = s.extra.value("instance_count", 0);
    total += n;
    ++histogram[n / 10 * 10];
  }
  json hist = json::object();
  std::ostringstream text;
  text << "samples: " << m.samples.size() << "\ninstances: " << total
       << "\ninstance count histogram:\n";
  for (const auto& [bin, n] : histogram) {
    hist[std::to_string(bin) + "-" + std::to_string(bin + 9)] = n;
    text << "  " << bin << "-" << bin + 9 << ": " << n << "\n";
  }
  ctx.summary({{"command", "synth"},
               {"samples", m.samples.size()},
               {"instances", total},
               {"histogram", hist},
               {"seconds", secs},
               {"manifest", (fs::path(a.out) / io::kManifestFile).generic_string()}},
              text.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rotaug
// ---------------------------------------------------------------------------

struct RotaugArgs {
  std::string pairs;
  std::string out;
  aug::RotationOptions options;
  std::string role = "train";
  bool no_instance_maps = false;
};

int cmd_rotaug(RotaugArgs a, const Context& ctx) {
  a.options.sweep.validate();
  try {
    a.options.role = io::parse_role(a.role);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  require_dir(a.pairs, "pairs");
  std::vector<std::string> ids;
  if (fs::is_directory(fs::path(a.pairs) / "images")) ids = io::list_image_ids(a.pairs);
  std::vector<io::AnnotatedImage> pairs(ids.size());
  parallel_for(ids.size(), ctx.jobs,
               [&](std::size_t i) { pairs[i] = io::read_annotated(a.pairs, ids[i]); });
  ctx.log("loaded " + std::to_string(pairs.size()) + " pairs from " + a.pairs);

  a.options.jobs = ctx.jobs;
  a.options.write.instance_map = !a.no_instance_maps;
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = aug::expand_rotation_dataset(pairs, a.out, a.options);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::size_t angles = a.options.sweep.degrees().size();
  std::ostringstream text;
  text << "pairs: " << pairs.size() << "\nangles per pair: " << angles
       << "\nsamples: " << m.samples.size() << "\n";
  ctx.summary({{"command", "rotaug"},
               {"pairs", pairs.size()},
               {"angles", angles},
               {"samples", m.samples.size()},
               {"seconds", secs}},
              text.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// glmask
// ---------------------------------------------------------------------------

struct GlmaskArgs {
  std::string images;
  std::string masks;
  std::string out;
  int compression = io::kDefaultPngCompression;
};

int cmd_glmask(const GlmaskArgs& a, const Context& ctx) {
  require_dir(a.images, "image");
  require_dir(a.masks, "mask");
  const auto images = stems_in(a.images, ".png");
  const auto masks = stems_in(a.masks, ".png");
  const std::set<std::string> mask_set(masks.begin(), masks.end());
  const std::set<std::string> image_set(images.begin(), images.end());
  std::vector<std::string> unpaired;
  for (const auto& id : images) {
    if (!mask_set.count(id)) unpaired.push_back(id);
  }
  for (const auto& id : masks) {
    if (!image_set.count(id)) unpaired.push_back(id);
  }
  if (!unpaired.empty()) {
    throw Error(ErrorCode::InvalidInput,
                std::to_string(unpaired.size()) +
                    " image/mask file(s) have no partner: " + join_ids(unpaired));
  }
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + a.out + "': " + ec.message());

  parallel_for(images.size(), ctx.jobs, [&](std::size_t i) {
    const auto& id = images[i];
    const Raster rgb = io::read_png(fs::path(a.images) / (id + ".png"));
    const BinaryMask mask = io::read_mask_png(fs::path(a.masks) / (id + ".png"));
    io::write_glmask_png(color::assemble_glmask(rgb, mask),
                         fs::path(a.out) / (id + ".png"), a.compression);
  });
  std::ostringstream text;
  text << "glmask images: " << images.size() << "\n";
  ctx.summary({{"command", "glmask"}, {"images", images.size()}}, text.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Shared label loading
// ---------------------------------------------------------------------------

struct Size {
  int width = 0;
  int height = 0;
};

std::optional<Size> parse_size(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    Size sz{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
    if (sz.width < 1 || sz.height < 1) throw std::invalid_argument(s);
    return sz;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "--size expects WIDTHxHEIGHT, got '" + s + "'");
  }
}

fs::path label_dir(const fs::path& root) {
  return fs::is_directory(root / "labels") ? root / "labels" : root;
}

// A YOLO-seg dataset directory: labels/ (or the directory itself) and the
// images/ used for dimensions. `images` overrides the image directory and
// `size` is the fallback when no image exists.
struct YoloSource {
  std::vector<InstanceSet> sets;
  std::map<std::string, std::string> domains;
};

Size dims_for(const std::string& id, const fs::path& image_dir,
              const std::optional<Size>& size) {
  const fs::path img = image_dir / (id + ".png");
  if (!image_dir.empty() && fs::exists(img)) {
    const auto info = io::read_png_info(img);
    return {info.width, info.height};
  }
  if (size) return *size;
  throw Error(ErrorCode::Io, "no image '" + img.string() +
                                 "' to size the labels of '" + id + "' (use --size)");
}

YoloSource load_yolo(const fs::path& root, const std::string& images_override,
                     const std::optional<Size>& size, int jobs) {
  require_dir(root, "label");
  YoloSource src;
  std::vector<std::string> ids;
  std::vector<fs::path> labels;
  std::vector<fs::path> images;
  const fs::path manifest = root / io::kManifestFile;
  if (fs::exists(manifest)) {
    const auto m = io::read_manifest(manifest);
    for (const auto& s : m.samples) {
      ids.push_back(s.id);
      labels.push_back(root / s.label);
      images.push_back(root / s.image);
      if (!s.domain.empty()) src.domains[s.id] = s.domain;
    }
  } else {
    const fs::path ldir = label_dir(root);
    const fs::path idir = images_override.empty() ? root / "images" : fs::path(images_override);
    for (const auto& id : stems_in(ldir, ".txt")) {
      ids.push_back(id);
      labels.push_back(ldir / (id + ".txt"));
      images.push_back(idir / (id + ".png"));
    }
  }
  src.sets.resize(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const Size d = dims_for(ids[i], images[i].parent_path(), size);
    auto records = io::parse_yolo_seg(io::read_text_file(labels[i]), labels[i].string());
    src.sets[i] = io::records_to_instances(records, ids[i], d.width, d.height);
  });
  return src;
}

std::vector<InstanceSet> load_instance_maps(const fs::path& root, int jobs) {
  require_dir(root, "instance map");
  const fs::path dir = fs::is_directory(root / "instances") ? root / "instances" : root;
  const auto ids = stems_in(dir, ".png");
  std::vector<InstanceSet> sets(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    sets[i] = io::read_instance_map(dir / (ids[i] + ".png"), ids[i]);
  });
  return sets;
}

std::map<std::string, std::string> read_domains(const std::string& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  require_file(path, "domain");
  json doc;
  try {
    doc = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, "invalid JSON in '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "domain file must map ids to tags");
  for (const auto& [id, tag] : doc.items()) {
    if (!tag.is_string()) throw Error(ErrorCode::Parse, "domain of '" + id + "' must be a string");
    out[id] = tag.get<std::string>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string format = "yolo";
  std::string preset = "wheat";
  std::optional<double> conf;
  std::optional<double> iou;
  std::string domains;
  std::string images;
  std::string size;
  std::string report;
  bool missing_as_empty = false;
};

int cmd_eval(const EvalArgs& a, const Context& ctx) {
  eval::EvalOptions opt =
      a.preset == "coco" ? eval::EvalOptions::coco() : eval::EvalOptions::wheat();
  if (a.conf) opt.conf_threshold = *a.conf;
  if (a.iou) opt.iou_threshold = *a.iou;
  opt.jobs = ctx.jobs;
  opt.validate();
  const auto size = parse_size(a.size);

  std::vector<InstanceSet> gts;
  std::vector<InstanceSet> preds;
  std::map<std::string, std::string> domains;
  if (a.format == "coco") {
    require_file(a.gt, "ground-truth");
    require_file(a.pred, "prediction");
    const auto ref = io::read_coco_json(a.gt);
    gts = ref.images;
    preds = io::read_coco_results(a.pred, ref);
  } else {
    auto gsrc = load_yolo(a.gt, a.images, size, ctx.jobs);
    gts = std::move(gsrc.sets);
    domains = std::move(gsrc.domains);
    std::map<std::string, const InstanceSet*> by_id;
    for (const auto& g : gts) by_id[g.image_id] = &g;
    require_dir(a.pred, "prediction");
    const fs::path pdir = label_dir(a.pred);
    std::set<std::string> seen;
    for (const auto& id : stems_in(pdir, ".txt")) {
      seen.insert(id);
      const fs::path p = pdir / (id + ".txt");
      const auto records = io::parse_yolo_seg(io::read_text_file(p), p.string());
      const auto it = by_id.find(id);
      Size d = size.value_or(Size{});
      if (it != by_id.end()) d = {it->second->width, it->second->height};
      if (d.width == 0) {
        // Left for evaluate() to report as an id without ground truth.
        preds.push_back(InstanceSet{id, 1, 1, {}});
        continue;
      }
      preds.push_back(io::records_to_instances(records, id, d.width, d.height));
    }
    if (a.missing_as_empty) {
      for (const auto& g : gts) {
        if (!seen.count(g.image_id)) preds.push_back({g.image_id, g.width, g.height, {}});
      }
    }
  }
  for (auto& [id, tag] : read_domains(a.domains)) domains[id] = tag;

  ctx.log("evaluating " + std::to_string(preds.size()) + " prediction sets against " +
          std::to_string(gts.size()) + " ground-truth sets");
  const auto report = eval::evaluate(preds, gts, domains, opt);
  const json doc = eval::to_json(report);
  if (!a.report.empty()) io::write_text_file(a.report, doc.dump(2) + "\n");
  ctx.summary(doc, eval::format_table(report));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pseudo
// ---------------------------------------------------------------------------

struct PseudoArgs {
  std::string pred;
  std::string images;
  std::string out;
  std::string split;
  std::string role = "train";
  std::string name = "pseudo";
  pseudo::PseudoLabelConfig config;
};

int cmd_pseudo(PseudoArgs a, const Context& ctx) {
  a.config.jobs = ctx.jobs;
  a.config.validate();
  io::DatasetRole role;
  try {
    role = io::parse_role(a.role);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  require_dir(a.pred, "prediction");
  require_dir(a.images, "image");
  pseudo::PseudoSplit split;
  split.default_role = role;
  if (!a.split.empty()) {
    require_file(a.split, "split");
    split = pseudo::read_split(a.split, role);
  }
  const auto manifests =
      pseudo::build_pseudo_dataset(a.pred, a.images, a.out, a.config, split, a.name);
  json roles = json::object();
  std::ostringstream text;
  for (const auto& m : manifests) {
    std::size_t negatives = 0, kept = 0;
    for (const auto& s : m.samples) {
      negatives += s.negative ? 1 : 0;
      kept += s.extra.value("kept", 0u);
    }
    roles[io::to_string(m.role)] = {{"images", m.samples.size()},
                                    {"negatives", negatives},
                                    {"instances", kept}};
    text << io::to_string(m.role) << ": " << m.samples.size() << " images, " << kept
         << " instances, " << negatives << " negatives\n";
  }
  ctx.summary({{"command", "pseudo"}, {"roles", roles}}, text.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

struct ConvertArgs {
  std::string from;
  std::string to;
  std::string in;
  std::string out;
  std::string images;
  std::string size;
};

int cmd_convert(const ConvertArgs& a, const Context& ctx) {
  const auto size = parse_size(a.size);
  std::vector<InstanceSet> sets;
  if (a.from == "yolo") {
    sets = load_yolo(a.in, a.images, size, ctx.jobs).sets;
  } else if (a.from == "coco") {
    require_file(a.in, "COCO");
    sets = io::read_coco_json(a.in).images;
  } else {
    sets = load_instance_maps(a.in, ctx.jobs);
  }

  auto make_dir = [](const fs::path& d) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create '" + d.string() + "': " + ec.message());
  };
  if (a.to == "yolo") {
    const fs::path dir = fs::path(a.out) / "labels";
    make_dir(dir);
    parallel_for(sets.size(), ctx.jobs, [&](std::size_t i) {
      io::write_yolo_seg(sets[i], dir / (sets[i].image_id + ".txt"));
    });
  } else if (a.to == "coco") {
    const fs::path parent = fs::path(a.out).parent_path();
    if (!parent.empty()) make_dir(parent);
    io::CocoDataset ds;
    ds.images = sets;
    io::write_coco_json(ds, a.out);
  } else {
    const fs::path dir = fs::path(a.out) / "instances";
    make_dir(dir);
    parallel_for(sets.size(), ctx.jobs, [&](std::size_t i) {
      io::write_instance_map(sets[i], dir / (sets[i].image_id + ".png"));
    });
  }
  std::size_t instances = 0;
  for (const auto& s : sets) instances += s.instances.size();
  std::ostringstream text;
  text << "converted " << sets.size() << " images, " << instances << " instances ("
       << a.from << " -> " << a.to << ")\n";
  ctx.summary({{"command", "convert"},
               {"from", a.from},
               {"to", a.to},
               {"images", sets.size()},
               {"instances", instances}},
              text.str());
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return kExitConfig;
    case ErrorCode::Io: return kExitIo;
    default: return kExitValidation;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"segkit: instance-segmentation dataset synthesis, conversion and scoring",
               "segkit"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence")
      ->envname(kConfigEnv);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("segkit ") + kVersion + " (manifest format_version " +
                           std::to_string(io::kManifestFormatVersion) + ")");

  Context ctx{out, err};
  ctx.jobs = default_jobs();
  app.add_option("-j,--jobs", ctx.jobs, "Worker threads (default: all cores)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--json", ctx.json_output, "Print a JSON summary on standard output");
  app.add_flag("-q,--quiet", ctx.quiet, "Suppress progress lines");

  const std::vector<std::string> roles = {"train", "valid", "test", "qa"};

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Cut-and-paste dataset synthesis");
  synth->add_option("--sources", synth_args.sources,
                    "Annotated frames (images/ + labels/ or instances/) for real cutouts");
  synth->add_option("--fakes", synth_args.fakes,
                    "Annotated frames for fake cutouts (default: --sources)");
  synth->add_option("--backgrounds", synth_args.backgrounds, "Directory of PNG backgrounds");
  synth->add_option("--out", synth_args.out, "Output dataset directory")->required();
  synth->add_option("--manifest", synth_args.manifest,
                    "Regenerate the dataset recorded in a synth manifest");
  synth->add_option("--augment", synth_args.augment, "Augmentation spec (JSON file)");
  synth->add_option("-n,--n", synth_args.config.n_samples, "Number of samples");
  synth->add_option("--seed", synth_args.config.master_seed, "Master seed");
  synth->add_option("--overlay-min", synth_args.config.overlay_min);
  synth->add_option("--overlay-max", synth_args.config.overlay_max);
  synth->add_option("--pool-switch", synth_args.config.pool_switch,
                    "Largest overlay count drawing from the large-head pool");
  synth->add_option("--overlay-count", synth_args.overlay_count,
                    "Force the overlay count of every sample");
  synth->add_option("--visibility", synth_args.config.visibility_threshold,
                    "Minimum visible fraction of a pasted instance");
  synth->add_option("--width", synth_args.config.width);
  synth->add_option("--height", synth_args.config.height);
  synth->add_flag("--annotate-fakes", synth_args.config.annotate_fakes);
  synth->add_flag("--feather", synth_args.config.feather);
  synth->add_option("--scale-jitter", synth_args.config.scale_jitter);
  synth->add_option("--name", synth_args.name);
  synth->add_option("--role", synth_args.role)->check(CLI::IsMember(roles));
  synth->add_option("--domain", synth_args.domain);
  synth->add_flag("--no-instance-maps", synth_args.no_instance_maps);
  synth->add_option("--compression", synth_args.compression)->check(CLI::Range(0, 9));

  RotaugArgs rot_args;
  auto* rotaug = app.add_subcommand("rotaug", "Exhaustive rotation expansion of annotated pairs");
  rotaug->add_option("--pairs", rot_args.pairs, "images/ + labels/ or instances/")->required();
  rotaug->add_option("--out", rot_args.out, "Output dataset directory")->required();
  rotaug->add_option("--start", rot_args.options.sweep.start, "First angle (degrees)");
  rotaug->add_option("--end", rot_args.options.sweep.end, "End angle, exclusive");
  rotaug->add_option("--step", rot_args.options.sweep.step);
  rotaug->add_option("--min-fraction", rot_args.options.rule.min_fraction,
                     "Drop instances keeping less than this share of their area");
  rotaug->add_option("--min-pixels", rot_args.options.rule.min_pixels);
  rotaug->add_option("--name", rot_args.options.name);
  rotaug->add_option("--role", rot_args.role)->check(CLI::IsMember(roles));
  rotaug->add_flag("--no-instance-maps", rot_args.no_instance_maps);
  rotaug->add_option("--compression", rot_args.options.write.compression)
      ->check(CLI::Range(0, 9));

  GlmaskArgs gl_args;
  auto* glmask = app.add_subcommand("glmask", "Assemble GLMask images from RGB + semantic mask");
  glmask->add_option("--images", gl_args.images, "RGB PNG directory")->required();
  glmask->add_option("--masks", gl_args.masks, "Semantic mask PNG directory")->required();
  glmask->add_option("--out", gl_args.out, "Output directory")->required();
  glmask->add_option("--compression", gl_args.compression)->check(CLI::Range(0, 9));

  EvalArgs ev_args;
  auto* evalc = app.add_subcommand("eval", "Score predictions: P, R, mAP@50, mAP@50-95");
  evalc->add_option("--pred", ev_args.pred, "Prediction labels dir or COCO results")->required();
  evalc->add_option("--gt", ev_args.gt, "Ground-truth dataset dir or COCO JSON")->required();
  evalc->add_option("--format", ev_args.format)->check(CLI::IsMember({"yolo", "coco"}));
  evalc->add_option("--preset", ev_args.preset, "wheat: conf 0.25 IoU 0.7; coco: conf 0.25 IoU 0.6")
      ->check(CLI::IsMember({"wheat", "coco"}));
  evalc->add_option("--conf", ev_args.conf, "Confidence threshold");
  evalc->add_option("--iou", ev_args.iou, "IoU threshold for P and R");
  evalc->add_option("--domains", ev_args.domains, "JSON map of image id to domain tag");
  evalc->add_option("--images", ev_args.images, "Image directory used for label dimensions");
  evalc->add_option("--size", ev_args.size, "WIDTHxHEIGHT when no image is available");
  evalc->add_option("--report", ev_args.report, "Write the JSON report here");
  evalc->add_flag("--missing-as-empty", ev_args.missing_as_empty,
                  "Treat ground-truth images without a prediction file as empty");

  PseudoArgs ps_args;
  auto* pseudoc = app.add_subcommand("pseudo", "Turn predictions into pseudo-label datasets");
  pseudoc->add_option("--pred", ps_args.pred, "YOLO-seg prediction files")->required();
  pseudoc->add_option("--images", ps_args.images, "PNG images")->required();
  pseudoc->add_option("--out", ps_args.out, "Output directory")->required();
  pseudoc->add_option("--conf", ps_args.config.confidence_threshold);
  pseudoc->add_option("--min-area", ps_args.config.min_instance_area);
  pseudoc->add_option("--split", ps_args.split, "JSON map of image id to role");
  pseudoc->add_option("--role", ps_args.role, "Role for images absent from --split")
      ->check(CLI::IsMember(roles));
  pseudoc->add_option("--name", ps_args.name);
  pseudoc->add_flag("--copy-images", ps_args.config.copy_images);

  ConvertArgs cv_args;
  const std::vector<std::string> formats = {"yolo", "coco", "masks"};
  auto* convert = app.add_subcommand("convert", "Convert between YOLO-seg, COCO JSON and id maps");
  convert->add_option("--from", cv_args.from)->required()->check(CLI::IsMember(formats));
  convert->add_option("--to", cv_args.to)->required()->check(CLI::IsMember(formats));
  convert->add_option("--in", cv_args.in)->required();
  convert->add_option("--out", cv_args.out)->required();
  convert->add_option("--images", cv_args.images, "Image directory for YOLO dimensions");
  convert->add_option("--size", cv_args.size, "WIDTHxHEIGHT when no image is available");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (*synth) {
      if (synth_args.manifest.empty() &&
          (synth_args.sources.empty() || synth_args.backgrounds.empty())) {
        throw Error(ErrorCode::Config, "synth needs --sources and --backgrounds (or --manifest)");
      }
      return cmd_synth(synth_args, ctx);
    }
    if (*rotaug) return cmd_rotaug(rot_args, ctx);
    if (*glmask) return cmd_glmask(gl_args, ctx);
    if (*evalc) return cmd_eval(ev_args, ctx);
    if (*pseudoc) return cmd_pseudo(ps_args, ctx);
    if (*convert) return cmd_convert(cv_args, ctx);
  } catch (const Error& e) {
    err << "segkit: error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "segkit: error (io): " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace segkit::cli
