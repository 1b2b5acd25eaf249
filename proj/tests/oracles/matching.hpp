#pragma once

// Brute-force reference for greedy mask matching and 101-point AP. Masks
// are dense 0/1 vectors; nothing here shares code with the library.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

struct Inst {
  int id;
  int cls;
  double conf;  // ignored for ground truth
  std::vector<std::uint8_t> px;
};

struct Scene {
  std::vector<Inst> preds;
  std::vector<Inst> gts;
};

inline double iou(const Inst& a, const Inst& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    inter += a.px[i] && b.px[i];
    uni += a.px[i] || b.px[i];
  }
  return uni ? double(inter) / double(uni) : 0.0;
}

inline long area(const Inst& a) {
  return std::accumulate(a.px.begin(), a.px.end(), 0L);
}

// Enumerates every ordering of the predictions, keeps the one consistent with
// (confidence desc, area desc, id asc), and replays it. For each prediction
// every unmatched gt is inspected and the best is kept.
inline std::vector<int> match(const Scene& s, double thr) {
  std::vector<int> perm(s.preds.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> chosen;
  do {
    bool ok = true;
    for (std::size_t i = 0; ok && i + 1 < perm.size(); ++i) {
      const Inst& a = s.preds[perm[i]];
      const Inst& b = s.preds[perm[i + 1]];
      if (a.conf < b.conf) ok = false;
      else if (a.conf == b.conf && area(a) < area(b)) ok = false;
      else if (a.conf == b.conf && area(a) == area(b) && a.id > b.id) ok = false;
    }
    if (ok) {
      chosen = perm;
      break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<int> matched_gt(s.preds.size(), -1);
  std::vector<bool> used(s.gts.size(), false);
  for (const int p : chosen) {
    int best = -1;
    double best_iou = 0;
    for (std::size_t g = 0; g < s.gts.size(); ++g) {
      if (used[g] || s.gts[g].cls != s.preds[p].cls) continue;
      const double v = iou(s.preds[p], s.gts[g]);
      if (v < thr) continue;
      if (best < 0 || v > best_iou || (v == best_iou && s.gts[g].id < s.gts[best].id)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      used[best] = true;
      matched_gt[p] = best;
    }
  }
  return matched_gt;
}

struct Det {
  double conf;
  long area;
  std::size_t image;
  int id;
  bool tp;
};

// AP from the definition: for each recall level k/100, the best precision of
// any prefix of the ranked list whose recall reaches it.
inline std::optional<double> ap(std::vector<Det> dets, long n_gt) {
  if (n_gt == 0) return std::nullopt;
  std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.area != b.area) return a.area > b.area;
    if (a.image != b.image) return a.image < b.image;
    return a.id < b.id;
  });
  double sum = 0;
  for (long k = 0; k <= 100; ++k) {
    double best = 0;
    for (std::size_t len = 1; len <= dets.size(); ++len) {
      long tp = 0;
      for (std::size_t i = 0; i < len; ++i) tp += dets[i].tp;
      if (100 * tp >= k * n_gt) best = std::max(best, double(tp) / double(len));
    }
    sum += best;
  }
  return sum / 101.0;
}

struct Summary {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0;
  std::optional<double> ap;
};

// Dataset summary at one IoU threshold after dropping predictions under
// `conf_thr`; AP is the mean over classes that have ground truth.
inline Summary evaluate(const std::vector<Scene>& scenes, double thr, double conf_thr) {
  Summary out;
  std::map<int, std::vector<Det>> dets;
  std::map<int, long> n_gt;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Scene s = scenes[i];
    std::erase_if(s.preds, [&](const Inst& p) { return p.conf < conf_thr; });
    const auto m = match(s, thr);
    long tp = 0;
    for (std::size_t p = 0; p < s.preds.size(); ++p) {
      tp += m[p] >= 0;
      dets[s.preds[p].cls].push_back(
          {s.preds[p].conf, area(s.preds[p]), i, s.preds[p].id, m[p] >= 0});
    }
    for (const auto& g : s.gts) ++n_gt[g.cls];
    out.tp += tp;
    out.fp += long(s.preds.size()) - tp;
    out.fn += long(s.gts.size()) - tp;
  }
  out.precision = out.tp + out.fp ? double(out.tp) / double(out.tp + out.fp) : 0.0;
  out.recall = out.tp + out.fn ? double(out.tp) / double(out.tp + out.fn) : 1.0;
  double sum = 0;
  int classes = 0;
  for (const auto& [cls, n] : n_gt) {
    sum += *ap(dets[cls], n);
    ++classes;
  }
  if (classes) out.ap = sum / classes;
  return out;
}

}  // namespace oracle
