#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segkit/manifest.hpp"
#include "segkit/raster.hpp"

namespace segkit::pseudo {

namespace fs = std::filesystem;

struct PseudoLabelConfig {
  double confidence_threshold = 0.25;
  std::int64_t min_instance_area = 16;
  bool copy_images = false;
  int jobs = 1;

  // Config error for a threshold outside [0, 1] or a negative area.
  void validate() const;
};

// Keeps instances with confidence >= threshold and area >= min area, in
// input order, with confidences removed. InvalidInput when a prediction
// lacks a confidence.
InstanceSet filter_predictions(const InstanceSet& preds,
                               const PseudoLabelConfig& config);

struct PseudoSplit {
  io::DatasetRole default_role = io::DatasetRole::Train;
  std::map<std::string, io::DatasetRole> roles;  // image id -> role
};

// Reads a JSON object {"<image id>": "train" | "valid" | "test" | "qa"}.
PseudoSplit read_split(const fs::path& path,
                       io::DatasetRole default_role = io::DatasetRole::Train);

// Pairs pred_dir/<id>.txt (YOLO-seg with confidences) with
// image_dir/<id>.png. Images without a prediction file become negatives;
// prediction files without an image are an InvalidInput error listing them.
// Writes out_dir/<role>/labels/<id>.txt and out_dir/<role>/manifest.json for
// every role that receives images, returned in role order.
std::vector<io::DatasetManifest> build_pseudo_dataset(
    const fs::path& pred_dir, const fs::path& image_dir, const fs::path& out_dir,
    const PseudoLabelConfig& config, const PseudoSplit& split = {},
    const std::string& name = "pseudo");

}  // namespace segkit::pseudo
