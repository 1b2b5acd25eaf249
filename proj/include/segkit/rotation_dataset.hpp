#pragma once

#include <filesystem>
#include <vector>

#include "segkit/augmentation.hpp"
#include "segkit/dataset.hpp"
#include "segkit/manifest.hpp"

namespace segkit::aug {

namespace fs = std::filesystem;

struct RotationSweep {
  int start = 0;  // inclusive, degrees
  int end = 360;  // exclusive
  int step = 1;

  // Config error unless step > 0 and start < end.
  void validate() const;
  std::vector<int> degrees() const;
};

struct RotationOptions {
  RotationSweep sweep;
  RotationDropRule rule;
  io::SampleWriteOptions write;
  std::string name = "rotaug";
  io::DatasetRole role = io::DatasetRole::Train;
  int jobs = 1;
};

// Sample name for one rotated copy, e.g. "plot3_r045".
std::string rotated_sample_id(const std::string& pair_id, int degrees);

// Writes every pair at every sweep angle under `out_dir` plus the manifest.
// InvalidInput when `pairs` is empty.
io::DatasetManifest expand_rotation_dataset(
    const std::vector<io::AnnotatedImage>& pairs, const fs::path& out_dir,
    const RotationOptions& options = {});

}  // namespace segkit::aug
