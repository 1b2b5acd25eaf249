#include "segkit/dataset.hpp"

#include <algorithm>
#include <system_error>

#include "segkit/contour.hpp"
#include "segkit/error.hpp"
#include "segkit/labels_io.hpp"

namespace segkit::io {

void prepare_dataset_dirs(const fs::path& root,
                          const SampleWriteOptions& options) {
  std::vector<fs::path> dirs = {root / "images", root / "labels"};
  if (options.semantic_mask) dirs.push_back(root / "masks");
  if (options.instance_map) dirs.push_back(root / "instances");
  for (const auto& d : dirs) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) {
      throw Error(ErrorCode::Io,
                  "cannot create directory '" + d.string() + "': " + ec.message());
    }
  }
}

std::size_t drop_unencodable(InstanceSet& instances) {
  auto& v = instances.instances;
  const std::size_t before = v.size();
  std::erase_if(v, [](const InstanceAnnotation& inst) {
    return !inst.mask.any() || !mask_to_polygon(inst.mask);
  });
  return before - v.size();
}

namespace {

bool pairwise_disjoint(const InstanceSet& set) {
  std::vector<std::uint8_t> seen(
      static_cast<std::size_t>(set.width) * set.height, 0);
  for (const auto& inst : set.instances) {
    const Rect r = inst.mask.roi();
    for (int y = r.y; y < r.bottom(); ++y) {
      const std::uint8_t* row = inst.mask.roi_row(y);
      for (int x = 0; x < r.width; ++x) {
        if (!row[x]) continue;
        std::uint8_t& s = seen[static_cast<std::size_t>(y) * set.width + r.x + x];
        if (s) return false;
        s = 1;
      }
    }
  }
  return true;
}

}  // namespace

SampleEntry write_sample(const fs::path& root, const std::string& id,
                         const Raster& image, InstanceSet& instances,
                         const SampleWriteOptions& options) {
  std::vector<YoloSegRecord> records;
  records.reserve(instances.instances.size());
  std::vector<InstanceAnnotation> kept;
  kept.reserve(instances.instances.size());
  for (auto& inst : instances.instances) {
    if (!inst.mask.any()) continue;
    auto rec = to_yolo_record(inst, instances.width, instances.height);
    if (!rec) continue;
    records.push_back(std::move(*rec));
    kept.push_back(std::move(inst));
  }
  instances.instances = std::move(kept);

  SampleEntry entry;
  entry.id = id;
  entry.image = "images/" + id + ".png";
  entry.label = "labels/" + id + ".txt";
  write_png(image, root / entry.image, options.compression);
  write_text_file(root / entry.label, format_yolo_seg(records));
  if (options.semantic_mask) {
    entry.semantic_mask = "masks/" + id + ".png";
    write_mask_png(union_mask(instances), root / entry.semantic_mask,
                   options.compression);
  }
  if (options.instance_map && pairwise_disjoint(instances)) {
    entry.instance_mask = "instances/" + id + ".png";
    write_instance_map(instances, root / entry.instance_mask,
                       options.compression);
  }
  return entry;
}

std::vector<std::string> list_image_ids(const fs::path& root) {
  const fs::path dir = root / "images";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::Io, "image directory '" + dir.string() + "' not found");
  }
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      ids.push_back(e.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

AnnotatedImage read_annotated(const fs::path& root, const std::string& id) {
  AnnotatedImage out;
  out.id = id;
  out.image = read_png(root / "images" / (id + ".png"));
  if (out.image.channels() != 3) {
    throw Error(ErrorCode::InvalidInput, "image '" + id + "' is not RGB");
  }
  const fs::path label = root / "labels" / (id + ".txt");
  const fs::path map = root / "instances" / (id + ".png");
  if (fs::exists(label)) {
    out.instances = read_yolo_seg(label, out.image.width(), out.image.height());
    out.instances.image_id = id;
  } else if (fs::exists(map)) {
    out.instances = read_instance_map(map, id);
    if (out.instances.width != out.image.width() ||
        out.instances.height != out.image.height()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "instance map of '" + id + "' differs in size from its image");
    }
  } else {
    throw Error(ErrorCode::InvalidInput,
                "no labels/" + id + ".txt or instances/" + id + ".png for image '" +
                    id + "'");
  }
  return out;
}

}  // namespace segkit::io
