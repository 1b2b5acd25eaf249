#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "segkit/colorspace.hpp"
#include "segkit/png_io.hpp"
#include "segkit/raster.hpp"

namespace segkit::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// YOLO segmentation labels
//
// One line per instance: `class x0 y0 x1 y1 ...` with vertices normalized by
// the image width/height and printed with 6 decimals. Prediction files add a
// trailing confidence token, detected by the odd coordinate count.
// ---------------------------------------------------------------------------

struct YoloSegRecord {
  int class_id = 0;
  std::vector<Point> vertices;  // normalized to [0, 1]
  std::optional<double> confidence;
};

// nullopt when the mask has no single-polygon encoding.
std::optional<YoloSegRecord> to_yolo_record(const InstanceAnnotation& instance,
                                            int width, int height);
// Throws Validation when an instance mask has no single-polygon encoding.
std::vector<YoloSegRecord> to_yolo_records(const InstanceSet& instances);
std::string format_yolo_seg(std::span<const YoloSegRecord> records);
std::string format_yolo_seg(const InstanceSet& instances);
void write_yolo_seg(const InstanceSet& instances, const fs::path& path);

// ParseError messages carry `source:line`.
std::vector<YoloSegRecord> parse_yolo_seg(std::string_view text,
                                          std::string_view source = "<text>");
// Vertices are denormalized against (width, height) and snapped to the
// nearest pixel center; instance ids follow line order starting at 1.
InstanceSet records_to_instances(std::span<const YoloSegRecord> records,
                                 std::string image_id, int width, int height);
InstanceSet read_yolo_seg(const fs::path& path, int width, int height);

// ---------------------------------------------------------------------------
// COCO instance annotations
// ---------------------------------------------------------------------------

struct Category {
  int id = 1;
  std::string name;
};

std::vector<Category> default_categories();  // {1, "wheat_head"}

// Instance class_id k corresponds to categories[k]. Images are named
// `<image_id>.png` and numbered by `numeric_ids` when it covers them, else
// 1..n in order.
struct CocoDataset {
  std::vector<InstanceSet> images;
  std::vector<Category> categories = default_categories();
  std::vector<long long> numeric_ids;
};

nlohmann::json to_coco_json(const CocoDataset& dataset);
CocoDataset from_coco_json(const nlohmann::json& doc);
void write_coco_json(const CocoDataset& dataset, const fs::path& path);
CocoDataset read_coco_json(const fs::path& path);

// COCO results: a JSON array of {image_id, category_id, segmentation, score}
// where image_id refers to the numbering of `reference`.
nlohmann::json to_coco_results(std::span<const InstanceSet> predictions,
                               const CocoDataset& reference);
std::vector<InstanceSet> from_coco_results(const nlohmann::json& doc,
                                           const CocoDataset& reference);
std::vector<InstanceSet> read_coco_results(const fs::path& path,
                                           const CocoDataset& reference);

// Decodes COCO RLE (column-major run lengths, counts as array or string).
BinaryMask decode_coco_rle(const nlohmann::json& rle);

// ---------------------------------------------------------------------------
// Mask rasters
// ---------------------------------------------------------------------------

// Semantic masks: 8-bit single-channel {0, 255}; nonzero reads as foreground.
void write_mask_png(const BinaryMask& mask, const fs::path& path,
                    int compression = kDefaultPngCompression);
BinaryMask read_mask_png(const fs::path& path);

// Instance id maps: 16-bit single-channel, 0 = background, i = instance i.
// Throws Validation for overlapping instances or ids outside [1, 65535].
void write_instance_map(const InstanceSet& instances, const fs::path& path,
                        int compression = kDefaultPngCompression);
InstanceSet read_instance_map(const fs::path& path, std::string image_id);

void write_glmask_png(const color::GLMaskImage& image, const fs::path& path,
                      int compression = kDefaultPngCompression);

// Reads a whole text file; Io error when missing.
std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view text);

}  // namespace segkit::io
