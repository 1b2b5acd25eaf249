#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "segkit/raster.hpp"

namespace segkit::eval {

struct MatchPair {
  int pred_id = 0;
  int gt_id = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in processing order
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_gts;
  double iou_threshold = 0.5;
};

// Predictions in order of descending confidence, then descending mask area,
// then ascending id. Each takes the unmatched ground truth of the same class
// with the highest IoU >= threshold, lowest id on ties. InvalidInput when a
// prediction lacks a confidence, ShapeMismatch when dimensions differ.
MatchResult match_instances(const InstanceSet& preds, const InstanceSet& gts,
                            double iou_threshold);

struct Counts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

Counts count(const MatchResult& match);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// P = 0 when nothing was predicted; R = 1 when there was nothing to find.
PrecisionRecall precision_recall(const Counts& counts);

// One prediction in a dataset-wide sweep.
struct ScoredDetection {
  double confidence = 0.0;
  std::int64_t area = 0;
  std::size_t image = 0;  // tie-break after area
  int id = 0;
  bool true_positive = false;
};

// 101-point interpolated AP of a single class. Detections are sorted by
// confidence desc, area desc, image asc, id asc. nullopt when n_gt = 0.
std::optional<double> average_precision(std::vector<ScoredDetection> detections,
                                        std::int64_t n_gt);

struct EvalOptions {
  double conf_threshold = 0.25;
  double iou_threshold = 0.7;  // for P, R and the counts
  std::vector<double> ap_thresholds = default_ap_thresholds();
  int jobs = 1;

  static std::vector<double> default_ap_thresholds();  // 0.50, 0.55, ..., 0.95
  static EvalOptions wheat();  // conf 0.25, IoU 0.7
  static EvalOptions coco();   // conf 0.25, IoU 0.6
  // Config error for thresholds outside their ranges.
  void validate() const;
};

// Dataset-level AP over every class with ground truth; classes without
// ground truth are excluded from the mean. nullopt when no class has any.
std::optional<double> average_precision(std::span<const InstanceSet> preds,
                                        std::span<const InstanceSet> gts,
                                        double iou_threshold,
                                        double conf_threshold = 0.0);

struct ThresholdStats {
  double iou = 0.0;
  std::optional<double> ap;
  Counts counts;
};

struct Metrics {
  std::int64_t images = 0;
  std::int64_t predictions = 0;  // after the confidence filter
  std::int64_t ground_truths = 0;
  double precision = 0.0;
  double recall = 0.0;
  Counts counts;  // at iou_threshold
  std::vector<ThresholdStats> per_threshold;
  std::optional<double> map50;
  std::optional<double> map50_95;
};

struct EvalReport {
  EvalOptions options;
  Metrics overall;
  std::map<std::string, Metrics> per_domain;
};

// Predictions and ground truths are paired by image_id; InvalidInput lists
// ids present on one side only. `domains` maps image_id to a tag; untagged
// images count only toward the overall metrics.
EvalReport evaluate(std::span<const InstanceSet> preds,
                    std::span<const InstanceSet> gts,
                    const std::map<std::string, std::string>& domains,
                    const EvalOptions& options = EvalOptions::wheat());

nlohmann::json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace segkit::eval
