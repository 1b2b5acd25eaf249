#include "segkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <unordered_map>

#include "segkit/error.hpp"
#include "segkit/parallel.hpp"

namespace segkit::eval {

using nlohmann::json;

namespace {

void check_dims(const InstanceSet& preds, const InstanceSet& gts) {
  if (preds.width != gts.width || preds.height != gts.height) {
    throw Error(ErrorCode::ShapeMismatch,
                "prediction and ground truth sizes differ for '" + gts.image_id + "'");
  }
}

void check_confidences(const InstanceSet& preds) {
  for (const auto& p : preds.instances) {
    if (!p.confidence) {
      throw Error(ErrorCode::InvalidInput,
                  "prediction " + std::to_string(p.id) + " of '" + preds.image_id +
                      "' has no confidence");
    }
  }
}

// Processing order: confidence desc, area desc, id asc.
std::vector<std::size_t> prediction_order(const InstanceSet& preds,
                                          const std::vector<std::int64_t>& areas) {
  std::vector<std::size_t> order(preds.instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = preds.instances[a];
    const auto& pb = preds.instances[b];
    if (*pa.confidence != *pb.confidence) return *pa.confidence > *pb.confidence;
    if (areas[a] != areas[b]) return areas[a] > areas[b];
    return pa.id < pb.id;
  });
  return order;
}

std::vector<std::size_t> gt_order(const InstanceSet& gts) {
  std::vector<std::size_t> order(gts.instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gts.instances[a].id < gts.instances[b].id;
  });
  return order;
}

// Row-major P x G; 0 across classes.
std::vector<double> iou_matrix(const InstanceSet& preds, const InstanceSet& gts,
                               const std::vector<std::int64_t>& pred_areas,
                               const std::vector<std::int64_t>& gt_areas) {
  const std::size_t P = preds.instances.size(), G = gts.instances.size();
  std::vector<double> m(P * G, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& pi = preds.instances[p];
    for (std::size_t g = 0; g < G; ++g) {
      const auto& gi = gts.instances[g];
      if (pi.class_id != gi.class_id) continue;
      if (intersect(pi.mask.roi(), gi.mask.roi()).empty()) continue;
      const std::int64_t inter = intersection_count(pi.mask, gi.mask);
      const std::int64_t uni = pred_areas[p] + gt_areas[g] - inter;
      m[p * G + g] = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    }
  }
  return m;
}

MatchResult greedy_match(const InstanceSet& preds, const InstanceSet& gts,
                         const std::vector<std::size_t>& porder,
                         const std::vector<std::size_t>& gorder,
                         const std::vector<double>& iou, double threshold,
                         std::vector<char>* tp_flags = nullptr) {
  const std::size_t G = gts.instances.size();
  MatchResult r;
  r.iou_threshold = threshold;
  std::vector<char> used(G, 0);
  if (tp_flags) tp_flags->assign(preds.instances.size(), 0);
  for (const std::size_t p : porder) {
    std::size_t best = G;
    double best_iou = -1.0;
    for (const std::size_t g : gorder) {
      if (used[g]) continue;
      if (preds.instances[p].class_id != gts.instances[g].class_id) continue;
      const double v = iou[p * G + g];
      if (v >= threshold && v > best_iou) {
        best = g;
        best_iou = v;
      }
    }
    if (best == G) {
      r.unmatched_preds.push_back(preds.instances[p].id);
      continue;
    }
    used[best] = 1;
    if (tp_flags) (*tp_flags)[p] = 1;
    r.pairs.push_back({preds.instances[p].id, gts.instances[best].id, best_iou});
  }
  for (const std::size_t g : gorder) {
    if (!used[g]) r.unmatched_gts.push_back(gts.instances[g].id);
  }
  return r;
}

std::vector<std::int64_t> areas_of(const InstanceSet& set) {
  std::vector<std::int64_t> a;
  a.reserve(set.instances.size());
  for (const auto& inst : set.instances) a.push_back(inst.mask.count());
  return a;
}

InstanceSet filter_confidence(const InstanceSet& preds, double conf_threshold) {
  InstanceSet out{preds.image_id, preds.width, preds.height, {}};
  for (const auto& p : preds.instances) {
    if (*p.confidence >= conf_threshold) out.instances.push_back(p);
  }
  return out;
}

bool detection_before(const ScoredDetection& a, const ScoredDetection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.area != b.area) return a.area > b.area;
  if (a.image != b.image) return a.image < b.image;
  return a.id < b.id;
}

struct Det {
  ScoredDetection base;
  int class_id = 0;
  std::vector<char> tp;  // per AP threshold
};

struct ImageEval {
  std::vector<Det> dets;
  std::map<int, std::int64_t> gt_per_class;
  Counts match_counts;
  std::vector<Counts> ap_counts;
  std::int64_t n_preds = 0;
  std::int64_t n_gts = 0;
};

ImageEval evaluate_image(const InstanceSet& raw_preds, const InstanceSet& gts,
                         std::size_t image_index, const EvalOptions& opt) {
  check_dims(raw_preds, gts);
  check_confidences(raw_preds);
  const InstanceSet preds = filter_confidence(raw_preds, opt.conf_threshold);
  const auto pa = areas_of(preds);
  const auto ga = areas_of(gts);
  const auto iou = iou_matrix(preds, gts, pa, ga);
  const auto porder = prediction_order(preds, pa);
  const auto gorder = gt_order(gts);

  ImageEval ev;
  ev.n_preds = static_cast<std::int64_t>(preds.instances.size());
  ev.n_gts = static_cast<std::int64_t>(gts.instances.size());
  for (const auto& g : gts.instances) ++ev.gt_per_class[g.class_id];
  ev.match_counts = count(greedy_match(preds, gts, porder, gorder, iou, opt.iou_threshold));

  ev.dets.resize(preds.instances.size());
  for (std::size_t p = 0; p < preds.instances.size(); ++p) {
    auto& d = ev.dets[p];
    d.base = {*preds.instances[p].confidence, pa[p], image_index,
              preds.instances[p].id, false};
    d.class_id = preds.instances[p].class_id;
    d.tp.resize(opt.ap_thresholds.size(), 0);
  }
  std::vector<char> flags;
  for (std::size_t t = 0; t < opt.ap_thresholds.size(); ++t) {
    ev.ap_counts.push_back(count(
        greedy_match(preds, gts, porder, gorder, iou, opt.ap_thresholds[t], &flags)));
    for (std::size_t p = 0; p < flags.size(); ++p) ev.dets[p].tp[t] = flags[p];
  }
  return ev;
}

Metrics aggregate(const std::vector<ImageEval>& evals,
                  const std::vector<std::size_t>& subset, const EvalOptions& opt) {
  Metrics m;
  m.images = static_cast<std::int64_t>(subset.size());
  std::map<int, std::int64_t> gt_per_class;
  std::vector<Counts> ap_counts(opt.ap_thresholds.size());
  for (const std::size_t i : subset) {
    const auto& ev = evals[i];
    m.predictions += ev.n_preds;
    m.ground_truths += ev.n_gts;
    m.counts += ev.match_counts;
    for (std::size_t t = 0; t < ap_counts.size(); ++t) ap_counts[t] += ev.ap_counts[t];
    for (const auto& [c, n] : ev.gt_per_class) gt_per_class[c] += n;
  }
  const auto pr = precision_recall(m.counts);
  m.precision = pr.precision;
  m.recall = pr.recall;

  bool all_present = !opt.ap_thresholds.empty();
  double sum = 0.0;
  for (std::size_t t = 0; t < opt.ap_thresholds.size(); ++t) {
    std::map<int, std::vector<ScoredDetection>> by_class;
    for (const std::size_t i : subset) {
      for (const auto& d : evals[i].dets) {
        ScoredDetection s = d.base;
        s.true_positive = d.tp[t] != 0;
        by_class[d.class_id].push_back(s);
      }
    }
    double class_sum = 0.0;
    int classes = 0;
    for (const auto& [c, n] : gt_per_class) {
      if (n == 0) continue;
      auto it = by_class.find(c);
      const auto ap = average_precision(
          it == by_class.end() ? std::vector<ScoredDetection>{} : std::move(it->second), n);
      class_sum += *ap;
      ++classes;
    }
    ThresholdStats ts;
    ts.iou = opt.ap_thresholds[t];
    ts.counts = ap_counts[t];
    if (classes > 0) ts.ap = class_sum / classes;
    if (ts.ap) {
      sum += *ts.ap;
    } else {
      all_present = false;
    }
    if (std::abs(ts.iou - 0.5) < 1e-9) m.map50 = ts.ap;
    m.per_threshold.push_back(ts);
  }
  if (all_present) m.map50_95 = sum / static_cast<double>(opt.ap_thresholds.size());
  return m;
}

}  // namespace

MatchResult match_instances(const InstanceSet& preds, const InstanceSet& gts,
                            double iou_threshold) {
  check_dims(preds, gts);
  check_confidences(preds);
  const auto pa = areas_of(preds);
  const auto ga = areas_of(gts);
  return greedy_match(preds, gts, prediction_order(preds, pa), gt_order(gts),
                      iou_matrix(preds, gts, pa, ga), iou_threshold);
}

Counts count(const MatchResult& match) {
  Counts c;
  c.tp = static_cast<std::int64_t>(match.pairs.size());
  c.fp = static_cast<std::int64_t>(match.unmatched_preds.size());
  c.fn = static_cast<std::int64_t>(match.unmatched_gts.size());
  return c;
}

PrecisionRecall precision_recall(const Counts& c) {
  PrecisionRecall pr;
  pr.precision = c.tp + c.fp == 0 ? 0.0
                                  : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  pr.recall = c.tp + c.fn == 0 ? 1.0
                               : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return pr;
}

std::optional<double> average_precision(std::vector<ScoredDetection> dets,
                                        std::int64_t n_gt) {
  if (n_gt <= 0) return std::nullopt;
  std::sort(dets.begin(), dets.end(), detection_before);
  const std::size_t n = dets.size();
  std::vector<std::int64_t> tp(n);
  std::vector<double> envelope(n);
  std::int64_t cum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += dets[i].true_positive ? 1 : 0;
    tp[i] = cum;
    envelope[i] = static_cast<double>(cum) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  double sum = 0.0;
  std::size_t i = 0;
  for (std::int64_t k = 0; k <= 100; ++k) {
    // Recall tp/n_gt >= k/100, compared exactly.
    while (i < n && 100 * tp[i] < k * n_gt) ++i;
    if (i == n) break;
    sum += envelope[i];
  }
  return sum / 101.0;
}

std::vector<double> EvalOptions::default_ap_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

EvalOptions EvalOptions::wheat() { return EvalOptions{}; }

EvalOptions EvalOptions::coco() {
  EvalOptions o;
  o.conf_threshold = 0.25;
  o.iou_threshold = 0.6;
  return o;
}

void EvalOptions::validate() const {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw Error(ErrorCode::Config, "confidence threshold must be in [0, 1]");
  }
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::Config, "IoU threshold must be in (0, 1]");
  }
  for (const double t : ap_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw Error(ErrorCode::Config, "AP thresholds must be in (0, 1]");
    }
  }
}

std::optional<double> average_precision(std::span<const InstanceSet> preds,
                                        std::span<const InstanceSet> gts,
                                        double iou_threshold,
                                        double conf_threshold) {
  EvalOptions opt;
  opt.conf_threshold = conf_threshold;
  opt.iou_threshold = iou_threshold;
  opt.ap_thresholds = {iou_threshold};
  return evaluate(preds, gts, {}, opt).overall.per_threshold.front().ap;
}

EvalReport evaluate(std::span<const InstanceSet> preds,
                    std::span<const InstanceSet> gts,
                    const std::map<std::string, std::string>& domains,
                    const EvalOptions& options) {
  options.validate();
  std::unordered_map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!pred_index.emplace(preds[i].image_id, i).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate prediction image id '" + preds[i].image_id + "'");
    }
  }
  std::set<std::string> gt_ids;
  std::vector<std::string> missing_preds;
  for (const auto& g : gts) {
    if (!gt_ids.insert(g.image_id).second) {
      throw Error(ErrorCode::InvalidInput,
                  "duplicate ground-truth image id '" + g.image_id + "'");
    }
    if (!pred_index.count(g.image_id)) missing_preds.push_back(g.image_id);
  }
  std::vector<std::string> missing_gts;
  for (const auto& p : preds) {
    if (!gt_ids.count(p.image_id)) missing_gts.push_back(p.image_id);
  }
  if (!missing_preds.empty() || !missing_gts.empty()) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? ", " : "") + v[i];
      if (v.size() > 20) s += ", ...";
      return s;
    };
    std::string msg = "image ids do not align";
    if (!missing_preds.empty()) msg += "; no predictions for: " + join(missing_preds);
    if (!missing_gts.empty()) msg += "; no ground truth for: " + join(missing_gts);
    throw Error(ErrorCode::InvalidInput, msg);
  }

  std::vector<ImageEval> evals(gts.size());
  parallel_for(gts.size(), options.jobs, [&](std::size_t i) {
    evals[i] = evaluate_image(preds[pred_index.at(gts[i].image_id)], gts[i], i, options);
  });

  EvalReport report;
  report.options = options;
  std::vector<std::size_t> all(gts.size());
  std::iota(all.begin(), all.end(), 0);
  report.overall = aggregate(evals, all, options);

  std::map<std::string, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (const auto it = domains.find(gts[i].image_id); it != domains.end()) {
      by_domain[it->second].push_back(i);
    }
  }
  for (const auto& [tag, subset] : by_domain) {
    report.per_domain[tag] = aggregate(evals, subset, options);
  }
  return report;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const Metrics& m) {
  json thresholds = json::array();
  for (const auto& t : m.per_threshold) {
    thresholds.push_back({{"iou", t.iou},
                          {"ap", opt_json(t.ap)},
                          {"tp", t.counts.tp},
                          {"fp", t.counts.fp},
                          {"fn", t.counts.fn}});
  }
  return {{"images", m.images},
          {"predictions", m.predictions},
          {"ground_truths", m.ground_truths},
          {"precision", m.precision},
          {"recall", m.recall},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"fn", m.counts.fn},
          {"map50", opt_json(m.map50)},
          {"map50_95", opt_json(m.map50_95)},
          {"per_threshold", std::move(thresholds)}};
}

}  // namespace

json to_json(const EvalReport& r) {
  json domains = json::object();
  for (const auto& [tag, m] : r.per_domain) domains[tag] = metrics_json(m);
  return {{"options",
           {{"conf_threshold", r.options.conf_threshold},
            {"iou_threshold", r.options.iou_threshold},
            {"ap_thresholds", r.options.ap_thresholds}}},
          {"overall", metrics_json(r.overall)},
          {"per_domain", std::move(domains)}};
}

std::string format_table(const EvalReport& r) {
  std::string out;
  char buf[256];
  auto fmt = [](const std::optional<double>& v) {
    char b[16];
    if (!v) return std::string("     -");
    std::snprintf(b, sizeof(b), "%6.3f", *v);
    return std::string(b);
  };
  std::snprintf(buf, sizeof(buf), "%-20s %7s %7s %7s %6s %6s %6s %8s\n", "scope",
                "images", "preds", "gts", "P", "R", "mAP50", "mAP50-95");
  out += buf;
  auto row = [&](const std::string& name, const Metrics& m) {
    std::snprintf(buf, sizeof(buf), "%-20s %7lld %7lld %7lld %6.3f %6.3f %s %8s\n",
                  name.c_str(), static_cast<long long>(m.images),
                  static_cast<long long>(m.predictions),
                  static_cast<long long>(m.ground_truths), m.precision, m.recall,
                  fmt(m.map50).c_str(), fmt(m.map50_95).c_str());
    out += buf;
  };
  row("overall", r.overall);
  for (const auto& [tag, m] : r.per_domain) row(tag, m);
  std::snprintf(buf, sizeof(buf), "conf >= %.2f, P/R at IoU %.2f\n",
                r.options.conf_threshold, r.options.iou_threshold);
  out += buf;
  return out;
}

}  // namespace segkit::eval
