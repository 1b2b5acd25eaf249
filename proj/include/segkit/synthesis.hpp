#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segkit/augmentation.hpp"
#include "segkit/cutout.hpp"
#include "segkit/dataset.hpp"
#include "segkit/manifest.hpp"
#include "segkit/raster.hpp"

namespace segkit::synth {

namespace fs = std::filesystem;

// One cutout per annotation: the tight box of its mask and the mask cropped
// to that box. `source_id` is "<image_id>#<instance id>".
// Throws EmptyMask for an empty annotation, ShapeMismatch when the image is
// not RGB or differs in size from the annotations.
std::vector<Cutout> extract_cutouts(const Raster& image,
                                    const InstanceSet& annotations,
                                    CutoutKind kind);

struct SizePartition {
  std::vector<Cutout> large;
  std::vector<Cutout> small;
};

// Stable sort by max_dim descending; the first ceil(n/2) are large.
// InsufficientPool below two cutouts.
SizePartition partition_by_size(std::vector<Cutout> cutouts);

struct SynthesisConfig {
  int n_samples = 50;
  int overlay_min = 10;
  int overlay_max = 100;
  int pool_switch = 50;  // N <= switch draws large reals, N > switch small
  double visibility_threshold = 0.25;
  std::uint64_t master_seed = 0;
  int width = 1024;
  int height = 1024;
  bool annotate_fakes = false;
  bool feather = false;       // blend the 1-px alpha rim 50/50
  double scale_jitter = 0.0;  // uniform scale in [1-j, 1+j], 0 = native
  aug::AugmentationSpec augmentation;  // spatial on cutouts, pixel on images
  std::optional<int> forced_overlay_count;

  // Config error unless overlay_min <= pool_switch <= overlay_max,
  // 0 < visibility_threshold <= 1 and the sizes are positive.
  void validate() const;
};

nlohmann::json to_json(const SynthesisConfig& config);
// Missing fields keep their defaults; unknown fields are a Config error.
SynthesisConfig synthesis_config_from_json(const nlohmann::json& doc);

enum class PoolKind { Fake, RealLarge, RealSmall };

// A cutout placed with its top-left at (x, y) in canvas coordinates.
struct Paste {
  const Cutout* cutout = nullptr;
  int x = 0;
  int y = 0;
  bool annotated = true;
};

struct Placement {
  PoolKind pool = PoolKind::Fake;
  std::size_t index = 0;  // into that pool
  std::string source_id;
  int x = 0;
  int y = 0;
  std::int64_t pasted_pixels = 0;
  std::int64_t visible_pixels = 0;
  int instance_id = 0;  // 0 when not annotated or dropped
};

struct CompositeResult {
  InstanceSet instances;
  std::vector<std::int64_t> pasted;   // per paste, on-canvas alpha pixels
  std::vector<std::int64_t> visible;  // per paste, after later occlusion
  std::vector<int> instance_ids;      // per paste, 0 when not retained
};

// Pastes in order onto `canvas` (hard alpha, or a 50/50 rim when
// `feather`). Later pastes own the pixels they cover. Annotated pastes whose
// visible share is at least `visibility_threshold` of their pasted pixels
// become instances with ids 1.. in paste order.
CompositeResult composite(Raster& canvas, const std::vector<Paste>& pastes,
                          double visibility_threshold, bool feather = false);

struct SynthesizedSample {
  Raster image;
  InstanceSet instances;
  BinaryMask semantic_mask;
  std::uint64_t seed = 0;
  int overlay_count = 0;  // N, before occlusion
  Rect crop;              // background window used
  std::vector<Placement> placements;
};

// Deterministic in (inputs, config, sample_seed). InsufficientPool for an
// empty pool, ShapeMismatch when the background is smaller than the output
// or not RGB, or when a cutout cannot keep half its box on the canvas.
SynthesizedSample synthesize_sample(const Raster& background,
                                    const std::vector<Cutout>& fake_pool,
                                    const std::vector<Cutout>& real_large,
                                    const std::vector<Cutout>& real_small,
                                    const SynthesisConfig& config,
                                    std::uint64_t sample_seed);

struct SynthesisInputs {
  std::vector<fs::path> backgrounds;  // loaded on demand, one per sample
  std::vector<Cutout> fakes;
  SizePartition reals;
};

struct DatasetOptions {
  std::string name = "synthetic";
  io::DatasetRole role = io::DatasetRole::Train;
  std::string domain;
  int jobs = 1;
  io::SampleWriteOptions write;
  nlohmann::json provenance = nlohmann::json::object();  // merged into generator
};

// Sample i uses seed derive_seed(master_seed, i) and picks its background
// with stream 1. Writes the dataset layout plus manifest.json under out_dir.
io::DatasetManifest synthesize_dataset(const SynthesisInputs& inputs,
                                       const SynthesisConfig& config,
                                       const fs::path& out_dir,
                                       const DatasetOptions& options = {});

}  // namespace segkit::synth
