#include "segkit/pseudo.hpp"

#include <algorithm>
#include <set>
#include <system_error>

#include "segkit/dataset.hpp"
#include "segkit/error.hpp"
#include "segkit/labels_io.hpp"
#include "segkit/parallel.hpp"
#include "segkit/png_io.hpp"

namespace segkit::pseudo {

using nlohmann::json;

void PseudoLabelConfig::validate() const {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw Error(ErrorCode::Config, "confidence threshold must be in [0, 1]");
  }
  if (min_instance_area < 0) {
    throw Error(ErrorCode::Config, "min_instance_area must be >= 0");
  }
}

InstanceSet filter_predictions(const InstanceSet& preds,
                               const PseudoLabelConfig& config) {
  InstanceSet out{preds.image_id, preds.width, preds.height, {}};
  for (const auto& p : preds.instances) {
    if (!p.confidence) {
      throw Error(ErrorCode::InvalidInput,
                  "prediction " + std::to_string(p.id) + " of '" + preds.image_id +
                      "' has no confidence");
    }
    if (*p.confidence < config.confidence_threshold) continue;
    if (p.mask.count() < config.min_instance_area) continue;
    InstanceAnnotation kept = p;
    kept.confidence.reset();
    out.instances.push_back(std::move(kept));
  }
  return out;
}

PseudoSplit read_split(const fs::path& path, io::DatasetRole default_role) {
  json doc;
  try {
    doc = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, "invalid JSON in '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::Parse, "split file '" + path.string() + "' must be an object");
  }
  PseudoSplit split;
  split.default_role = default_role;
  for (const auto& [id, role] : doc.items()) {
    if (!role.is_string()) {
      throw Error(ErrorCode::Parse, "split entry '" + id + "' must be a role string");
    }
    split.roles[id] = io::parse_role(role.get<std::string>());
  }
  return split;
}

namespace {

std::vector<std::string> stems(const fs::path& dir, const std::string& ext) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::Io, "directory '" + dir.string() + "' not found");
  }
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out.push_back(e.path().stem().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void make_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) {
    throw Error(ErrorCode::Io, "cannot create directory '" + d.string() + "': " + ec.message());
  }
}

}  // namespace

std::vector<io::DatasetManifest> build_pseudo_dataset(
    const fs::path& pred_dir, const fs::path& image_dir, const fs::path& out_dir,
    const PseudoLabelConfig& config, const PseudoSplit& split,
    const std::string& name) {
  config.validate();
  const auto images = stems(image_dir, ".png");
  const auto preds = stems(pred_dir, ".txt");
  const std::set<std::string> image_set(images.begin(), images.end());
  const std::set<std::string> pred_set(preds.begin(), preds.end());
  std::vector<std::string> orphans;
  for (const auto& p : preds) {
    if (!image_set.count(p)) orphans.push_back(p);
  }
  if (!orphans.empty()) {
    std::string list;
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) {
      list += (i ? ", " : "") + orphans[i];
    }
    if (orphans.size() > 20) list += ", ...";
    throw Error(ErrorCode::InvalidInput,
                std::to_string(orphans.size()) +
                    " prediction file(s) have no matching image: " + list);
  }

  auto role_of = [&](const std::string& id) {
    const auto it = split.roles.find(id);
    return it == split.roles.end() ? split.default_role : it->second;
  };
  std::set<io::DatasetRole> roles;
  for (const auto& id : images) roles.insert(role_of(id));
  for (const auto role : roles) {
    make_dir(out_dir / io::to_string(role) / "labels");
    if (config.copy_images) make_dir(out_dir / io::to_string(role) / "images");
  }

  const fs::path abs_images = fs::absolute(image_dir);
  std::vector<io::SampleEntry> entries(images.size());
  parallel_for(images.size(), config.jobs, [&](std::size_t i) {
    const std::string& id = images[i];
    const fs::path role_dir = out_dir / io::to_string(role_of(id));
    const fs::path image_path = image_dir / (id + ".png");
    const auto info = io::read_png_info(image_path);

    InstanceSet raw{id, info.width, info.height, {}};
    if (pred_set.count(id)) {
      const fs::path pred_path = pred_dir / (id + ".txt");
      const auto records =
          io::parse_yolo_seg(io::read_text_file(pred_path), pred_path.string());
      raw = io::records_to_instances(records, id, info.width, info.height);
    }
    const InstanceSet kept = filter_predictions(raw, config);
    std::vector<io::YoloSegRecord> records;
    for (const auto& inst : kept.instances) {
      if (auto rec = io::to_yolo_record(inst, kept.width, kept.height)) {
        records.push_back(std::move(*rec));
      }
    }

    io::SampleEntry e;
    e.id = id;
    e.label = "labels/" + id + ".txt";
    io::write_text_file(role_dir / e.label, io::format_yolo_seg(records));
    if (config.copy_images) {
      e.image = "images/" + id + ".png";
      std::error_code ec;
      fs::copy_file(image_path, role_dir / e.image,
                    fs::copy_options::overwrite_existing, ec);
      if (ec) {
        throw Error(ErrorCode::Io, "cannot copy '" + image_path.string() + "': " +
                                       ec.message());
      }
    } else {
      e.image = (abs_images / (id + ".png"))
                    .lexically_relative(fs::absolute(role_dir))
                    .generic_string();
    }
    e.negative = records.empty();
    e.extra["predictions"] = raw.instances.size();
    e.extra["kept"] = records.size();
    entries[i] = std::move(e);
  });

  std::vector<io::DatasetManifest> manifests;
  for (const auto role : roles) {
    io::DatasetManifest m;
    m.name = name + "_" + io::to_string(role);
    m.role = role;
    m.generator = {{"tool", "pseudo"},
                   {"confidence_threshold", config.confidence_threshold},
                   {"min_instance_area", config.min_instance_area},
                   {"copy_images", config.copy_images}};
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (role_of(images[i]) == role) m.samples.push_back(entries[i]);
    }
    io::write_manifest(m, out_dir / io::to_string(role) / io::kManifestFile);
    manifests.push_back(std::move(m));
  }
  return manifests;
}

}  // namespace segkit::pseudo
