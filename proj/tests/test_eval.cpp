#include <doctest.h>

#include <random>

#include "oracles/matching.hpp"
#include "segkit/error.hpp"
#include "segkit/eval.hpp"
#include "support.hpp"

using namespace segkit;
using namespace segkit::eval;

namespace {

constexpr int kW = 24;
constexpr int kH = 20;

InstanceAnnotation ann(int id, int cls, const BinaryMask& m, std::optional<double> conf = {}) {
  return {id, cls, m, conf};
}

oracle::Inst to_oracle(const InstanceAnnotation& a) {
  std::vector<std::uint8_t> px(kW * kH);
  for (int y = 0; y < kH; ++y)
    for (int x = 0; x < kW; ++x) px[y * kW + x] = a.mask.at(x, y);
  return {a.id, a.class_id, a.confidence.value_or(0), px};
}

BinaryMask jittered_box(std::mt19937_64& gen, int x, int y, int w, int h) {
  std::uniform_int_distribution<int> d(-2, 2);
  const int x0 = std::clamp(x + d(gen), 0, kW - 2), y0 = std::clamp(y + d(gen), 0, kH - 2);
  const int w0 = std::clamp(w + d(gen), 1, kW - x0), h0 = std::clamp(h + d(gen), 1, kH - y0);
  return testing::rect_mask(kW, kH, x0, y0, w0, h0);
}

struct RandomScene {
  InstanceSet preds;
  InstanceSet gts;
  oracle::Scene oracle;
};

RandomScene random_scene(const std::string& id, std::mt19937_64& gen) {
  RandomScene s;
  s.preds = {id, kW, kH, {}};
  s.gts = {id, kW, kH, {}};
  std::uniform_int_distribution<int> n_gt(0, 4), n_extra(0, 3), pos(0, 14), size(3, 9), cls(0, 1);
  std::uniform_int_distribution<int> conf_level(0, 5);
  std::vector<std::tuple<int, int, int, int, int>> boxes;
  const int ng = n_gt(gen);
  for (int i = 0; i < ng; ++i) {
    const int x = pos(gen), y = pos(gen) % 12, w = size(gen), h = size(gen), c = cls(gen);
    boxes.emplace_back(x, y, w, h, c);
    s.gts.instances.push_back(ann(10 + i * 3, c, testing::rect_mask(kW, kH, x, y, std::min(w, kW - x), std::min(h, kH - y))));
  }
  int pid = 1;
  for (const auto& [x, y, w, h, c] : boxes) {
    if (gen() % 4 == 0) continue;
    const int pc = gen() % 6 == 0 ? 1 - c : c;
    s.preds.instances.push_back(ann(pid++, pc, jittered_box(gen, x, y, w, h), 0.2 + 0.15 * conf_level(gen)));
  }
  const int ne = n_extra(gen);
  for (int i = 0; i < ne; ++i) {
    s.preds.instances.push_back(
        ann(pid++, cls(gen), jittered_box(gen, pos(gen), pos(gen) % 12, size(gen), size(gen)),
            0.2 + 0.15 * conf_level(gen)));
  }
  for (const auto& p : s.preds.instances) s.oracle.preds.push_back(to_oracle(p));
  for (const auto& g : s.gts.instances) s.oracle.gts.push_back(to_oracle(g));
  return s;
}

}  // namespace

TEST_CASE("trivial matches") {
  const auto a = testing::rect_mask(kW, kH, 2, 2, 6, 6);
  const InstanceSet gts{"x", kW, kH, {ann(1, 0, a)}};
  InstanceSet preds{"x", kW, kH, {ann(1, 0, a, 0.9)}};
  auto m = match_instances(preds, gts, 0.5);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].iou == 1.0);
  CHECK(count(m) == Counts{1, 0, 0});

  preds.instances[0].class_id = 1;
  CHECK(count(match_instances(preds, gts, 0.5)) == Counts{0, 1, 1});

  preds.instances[0].confidence.reset();
  CHECK_THROWS_AS(match_instances(preds, gts, 0.5), Error);

  const InstanceSet other{"x", kW + 1, kH, {}};
  try {
    match_instances(other, gts, 0.5);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("higher confidence claims the contested ground truth") {
  const auto g = testing::rect_mask(kW, kH, 0, 0, 10, 10);
  const InstanceSet gts{"x", kW, kH, {ann(1, 0, g)}};
  // p2 overlaps better but p1 is more confident.
  const InstanceSet preds{"x", kW, kH,
                          {ann(1, 0, testing::rect_mask(kW, kH, 0, 0, 10, 8), 0.9),
                           ann(2, 0, g, 0.8)}};
  const auto m = match_instances(preds, gts, 0.5);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].pred_id == 1);
  CHECK(m.unmatched_preds == std::vector<int>{2});
}

TEST_CASE("IoU exactly at the threshold matches") {
  const auto g = testing::rect_mask(kW, kH, 0, 0, 10, 10);
  const auto p = testing::rect_mask(kW, kH, 0, 0, 10, 7);  // IoU 0.7
  const InstanceSet gts{"x", kW, kH, {ann(1, 0, g)}};
  const InstanceSet preds{"x", kW, kH, {ann(1, 0, p, 0.5)}};
  CHECK(count(match_instances(preds, gts, 0.7)).tp == 1);
  CHECK(count(match_instances(preds, gts, 0.71)).tp == 0);
}

TEST_CASE("precision and recall conventions") {
  auto pr = precision_recall({0, 0, 0});
  CHECK(pr.precision == 0.0);
  CHECK(pr.recall == 1.0);
  pr = precision_recall({0, 0, 4});
  CHECK(pr.precision == 0.0);
  CHECK(pr.recall == 0.0);
  pr = precision_recall({3, 1, 2});
  CHECK(pr.precision == doctest::Approx(0.75));
  CHECK(pr.recall == doctest::Approx(0.6));
}

TEST_CASE("average precision by hand") {
  // Ranked TP, FP, TP, FP with three ground truths: recall levels 0..33 see
  // precision 1, levels 34..66 see 2/3, the rest 0.
  std::vector<ScoredDetection> d = {
      {0.9, 10, 0, 1, true}, {0.8, 10, 0, 2, false}, {0.7, 10, 0, 3, true}, {0.6, 10, 0, 4, false}};
  CHECK(*average_precision(d, 3) == doctest::Approx(56.0 / 101.0).epsilon(1e-12));
  CHECK_FALSE(average_precision(d, 0).has_value());
  CHECK(*average_precision({}, 5) == 0.0);
  std::vector<ScoredDetection> perfect = {{0.5, 1, 0, 1, true}, {0.4, 1, 0, 2, true}};
  CHECK(*average_precision(perfect, 2) == 1.0);
  // Ties in confidence fall back to area: the larger false positive ranks first.
  std::vector<ScoredDetection> tied = {{0.5, 5, 0, 1, true}, {0.5, 9, 0, 2, false}};
  CHECK(*average_precision(tied, 1) == doctest::Approx(0.5));
}

TEST_CASE("matching agrees with the brute-force oracle") {
  std::mt19937_64 gen(2024);
  for (int t = 0; t < 400; ++t) {
    const auto s = random_scene("s", gen);
    for (double thr : {0.5, 0.7}) {
      const auto expected = oracle::match(s.oracle, thr);
      const auto m = match_instances(s.preds, s.gts, thr);
      std::map<int, int> got;
      for (const auto& p : m.pairs) got[p.pred_id] = p.gt_id;
      for (std::size_t p = 0; p < s.preds.instances.size(); ++p) {
        const int pid = s.preds.instances[p].id;
        CAPTURE(t);
        if (expected[p] < 0) {
          CHECK(got.count(pid) == 0);
        } else {
          REQUIRE(got.count(pid) == 1);
          CHECK(got[pid] == s.gts.instances[expected[p]].id);
        }
      }
    }
  }
}

TEST_CASE("dataset metrics agree with the oracle") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<InstanceSet> preds, gts;
    std::vector<oracle::Scene> scenes;
    for (int i = 0; i < 6; ++i) {
      auto s = random_scene("img" + std::to_string(i), gen);
      preds.push_back(s.preds);
      gts.push_back(s.gts);
      scenes.push_back(s.oracle);
    }
    EvalOptions opt = EvalOptions::wheat();
    opt.jobs = 1 + trial % 3;
    const auto report = evaluate(preds, gts, {}, opt);
    const auto ref = oracle::evaluate(scenes, 0.7, 0.25);
    CAPTURE(trial);
    CHECK(report.overall.counts == Counts{ref.tp, ref.fp, ref.fn});
    CHECK(report.overall.precision == doctest::Approx(ref.precision));
    CHECK(report.overall.recall == doctest::Approx(ref.recall));
    double sum = 0;
    for (const auto& st : report.overall.per_threshold) {
      const auto r = oracle::evaluate(scenes, st.iou, 0.25);
      REQUIRE(st.ap.has_value() == r.ap.has_value());
      if (r.ap) {
        CHECK(*st.ap == doctest::Approx(*r.ap).epsilon(1e-12));
        sum += *r.ap;
      }
    }
    const auto r50 = oracle::evaluate(scenes, 0.5, 0.25);
    if (r50.ap) {
      CHECK(*report.overall.map50 == doctest::Approx(*r50.ap).epsilon(1e-12));
      CHECK(*report.overall.map50_95 == doctest::Approx(sum / 10).epsilon(1e-12));
    }
    const auto direct = average_precision(preds, gts, 0.5, 0.25);
    CHECK(direct.has_value() == r50.ap.has_value());
  }
}

TEST_CASE("evaluate pairs images and splits by domain") {
  const auto g = testing::rect_mask(kW, kH, 0, 0, 8, 8);
  std::vector<InstanceSet> gts = {{"a", kW, kH, {ann(1, 0, g)}}, {"b", kW, kH, {ann(1, 0, g)}}};
  std::vector<InstanceSet> preds = {{"b", kW, kH, {}}, {"a", kW, kH, {ann(1, 0, g, 0.9)}}};
  const auto rep = evaluate(preds, gts, {{"a", "early"}, {"b", "late"}});
  CHECK(rep.overall.images == 2);
  CHECK(rep.overall.counts == Counts{1, 0, 1});
  CHECK(rep.per_domain.at("early").recall == 1.0);
  CHECK(rep.per_domain.at("late").recall == 0.0);
  CHECK(*rep.per_domain.at("early").map50 == 1.0);
  CHECK(*rep.per_domain.at("late").map50 == 0.0);
  CHECK(rep.per_domain.at("late").precision == 0.0);

  // Low-confidence predictions vanish from every metric.
  preds[0].instances.push_back(ann(5, 0, g, 0.1));
  const auto filtered = evaluate(preds, gts, {});
  CHECK(filtered.overall.predictions == 1);
  CHECK(filtered.overall.counts == Counts{1, 0, 1});

  preds[0].image_id = "c";
  try {
    evaluate(preds, gts, {});
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
    const std::string what = e.what();
    CHECK(what.find("b") != std::string::npos);
    CHECK(what.find("c") != std::string::npos);
  }

  const auto js = to_json(rep);
  CHECK(js["overall"]["tp"] == 1);
  CHECK(js["per_domain"]["late"]["map50"] == 0.0);
  CHECK(format_table(rep).find("late") != std::string::npos);
}

TEST_CASE("metric invariants") {
  std::mt19937_64 gen(99);
  std::vector<InstanceSet> preds, gts;
  for (int i = 0; i < 10; ++i) {
    auto s = random_scene("m" + std::to_string(i), gen);
    preds.push_back(s.preds);
    gts.push_back(s.gts);
  }
  std::optional<double> prev;
  for (double thr : EvalOptions::default_ap_thresholds()) {
    const auto ap = average_precision(preds, gts, thr);
    REQUIRE(ap.has_value());
    CHECK(*ap >= 0.0);
    CHECK(*ap <= 1.0);
    if (prev) CHECK(*ap <= *prev + 1e-12);
    prev = ap;
  }
  // Perfect predictions score 1 everywhere.
  std::vector<InstanceSet> copy = gts;
  for (auto& s : copy)
    for (auto& a : s.instances) a.confidence = 0.9;
  const auto rep = evaluate(copy, gts, {}, EvalOptions::coco());
  CHECK(rep.overall.precision == 1.0);
  CHECK(rep.overall.recall == 1.0);
  CHECK(*rep.overall.map50_95 == 1.0);
  CHECK(EvalOptions::coco().iou_threshold == 0.6);
  EvalOptions bad;
  bad.conf_threshold = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
