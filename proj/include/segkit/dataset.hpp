#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segkit/manifest.hpp"
#include "segkit/png_io.hpp"
#include "segkit/raster.hpp"

namespace segkit::io {

namespace fs = std::filesystem;

// On-disk layout shared by every generated dataset:
//   images/<id>.png      RGB frame
//   labels/<id>.txt      YOLO-seg polygons
//   masks/<id>.png       semantic mask {0, 255}
//   instances/<id>.png   16-bit instance id map
//   manifest.json
struct SampleWriteOptions {
  bool semantic_mask = true;
  bool instance_map = true;
  int compression = kDefaultPngCompression;
};

inline constexpr const char* kManifestFile = "manifest.json";

// Creates the layout directories. Io error when `root` cannot be created.
void prepare_dataset_dirs(const fs::path& root, const SampleWriteOptions& options);

// Removes instances whose masks have no single-polygon encoding (all pixels
// of every component collinear with no bridge between them). Returns the
// number removed.
std::size_t drop_unencodable(InstanceSet& instances);

// Writes one sample and returns its manifest entry with layout-relative
// paths. Instances that cannot be encoded are dropped from `instances`
// first. The id map is skipped when instances overlap.
SampleEntry write_sample(const fs::path& root, const std::string& id,
                         const Raster& image, InstanceSet& instances,
                         const SampleWriteOptions& options);

// Reads images/<id>.png with labels from labels/<id>.txt, or from
// instances/<id>.png when no label file exists.
struct AnnotatedImage {
  std::string id;
  Raster image;
  InstanceSet instances;
};

// Lists the ids under root/images, sorted. Io error when the directory is
// missing.
std::vector<std::string> list_image_ids(const fs::path& root);
AnnotatedImage read_annotated(const fs::path& root, const std::string& id);

}  // namespace segkit::io
