#include "mgd/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "eval_fixture.hpp"
#include "mgd/error.hpp"

namespace mgd {
namespace {

Detection det(double x0, double y0, double x1, double y1, int cls, double score) {
  return {from_corners(CornerBox(x0, y0, x1, y1)), cls, score};
}

Annotation gt(double x0, double y0, double x1, double y1, int cls, bool difficult = false) {
  return {from_corners(CornerBox(x0, y0, x1, y1)), cls, difficult};
}

const ClassAp& class_ap(const EvalReport& r, int id) {
  return *std::find_if(r.classes.begin(), r.classes.end(), [&](const ClassAp& c) { return c.class_id == id; });
}

TEST(MatchTest, HigherScoreWinsTheGt) {
  const std::vector<Annotation> gts{gt(0, 0, 10, 10, 0)};
  const std::vector<Detection> dets{det(0, 0, 10, 9, 0, 0.6), det(0, 0, 10, 10, 0, 0.9)};
  const auto m = match_detections(dets, gts, 0.5);
  EXPECT_EQ(m.status[0], MatchStatus::kFalsePositive);
  EXPECT_EQ(m.status[1], MatchStatus::kTruePositive);
  EXPECT_EQ(m.gt_count.at(0), 1);
}

TEST(MatchTest, ClassesAndThresholds) {
  const std::vector<Annotation> gts{gt(0, 0, 10, 10, 0), gt(20, 20, 30, 30, 1, true)};
  const std::vector<Detection> dets{det(0, 0, 10, 10, 1, 0.9), det(0, 0, 10, 4, 0, 0.8),
                                    det(20, 20, 30, 30, 1, 0.7)};
  const auto m = match_detections(dets, gts, 0.5);
  EXPECT_EQ(m.status[0], MatchStatus::kFalsePositive);
  EXPECT_EQ(m.status[1], MatchStatus::kFalsePositive);
  EXPECT_EQ(m.status[2], MatchStatus::kIgnored);
  EXPECT_EQ(m.gt_count.count(1), 0u);
}

TEST(MatchTest, PicksHighestIouUnmatchedGt) {
  const std::vector<Annotation> gts{gt(0, 0, 10, 10, 0), gt(2, 0, 12, 10, 0)};
  const std::vector<Detection> dets{det(2, 0, 12, 10, 0, 0.9), det(1, 0, 11, 10, 0, 0.8)};
  const auto m = match_detections(dets, gts, 0.5);
  EXPECT_EQ(m.status[0], MatchStatus::kTruePositive);
  EXPECT_EQ(m.status[1], MatchStatus::kTruePositive);
}

TEST(ApTest, FalseThenTrue) {
  const std::vector<RankedMatch> m{{0.9, false}, {0.8, true}};
  EXPECT_DOUBLE_EQ(*average_precision(m, 1, ApProtocol::kVoc11Point), 0.5);
  EXPECT_DOUBLE_EQ(*average_precision(m, 1, ApProtocol::kVocAllPoint), 0.5);
}

TEST(ApTest, PerfectAndEmpty) {
  const std::vector<RankedMatch> perfect{{0.9, true}, {0.8, true}};
  for (auto p : {ApProtocol::kVoc11Point, ApProtocol::kVocAllPoint, ApProtocol::kCocoAverage}) {
    EXPECT_DOUBLE_EQ(*average_precision(perfect, 2, p), 1.0);
    EXPECT_DOUBLE_EQ(*average_precision(std::vector<RankedMatch>{}, 2, p), 0.0);
    EXPECT_FALSE(average_precision(perfect, 0, p).has_value());
  }
}

TEST(ApTest, BoundedAndOrderInvariant) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution tp(0.5);
  std::uniform_real_distribution<double> score(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RankedMatch> m(static_cast<std::size_t>(trial % 30));
    int hits = 0;
    for (auto& x : m) {
      x = {score(rng), tp(rng)};
      hits += x.true_positive;
    }
    const int num_gt = hits + trial % 4 + 1;
    for (auto p : {ApProtocol::kVoc11Point, ApProtocol::kVocAllPoint, ApProtocol::kCocoAverage}) {
      const double ap = *average_precision(m, num_gt, p);
      EXPECT_GE(ap, 0.0);
      EXPECT_LE(ap, 1.0);
      auto shuffled = m;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      EXPECT_DOUBLE_EQ(*average_precision(shuffled, num_gt, p), ap);
    }
  }
}

TEST(EvaluateTest, HandFixtureElevenPoint) {
  const auto r = evaluate(testing::eval_fixture_dets(), testing::eval_fixture_gt());
  EXPECT_NEAR(*class_ap(r, 0).ap, testing::kFixtureClass0Ap11, 1e-12);
  EXPECT_NEAR(*class_ap(r, 1).ap, testing::kFixtureClass1Ap11, 1e-12);
  EXPECT_NEAR(r.map, (8.4 / 11 + 0.5) / 2, 1e-12);
  EXPECT_EQ(class_ap(r, 0).gt_count, 3);
  EXPECT_EQ(class_ap(r, 1).gt_count, 3);
}

TEST(EvaluateTest, HandFixtureAllPoint) {
  EvalConfig cfg;
  cfg.protocol = ApProtocol::kVocAllPoint;
  const auto r = evaluate(testing::eval_fixture_dets(), testing::eval_fixture_gt(), cfg);
  EXPECT_NEAR(*class_ap(r, 0).ap, testing::kFixtureClass0ApAll, 1e-12);
  EXPECT_NEAR(*class_ap(r, 1).ap, testing::kFixtureClass1ApAll, 1e-12);
}

TEST(EvaluateTest, PerfectPredictions) {
  const auto gts = testing::eval_fixture_gt();
  for (auto p : {ApProtocol::kVoc11Point, ApProtocol::kVocAllPoint, ApProtocol::kCocoAverage}) {
    EvalConfig cfg;
    cfg.protocol = p;
    const auto r = evaluate(testing::perfect_dets(gts), gts, cfg);
    EXPECT_DOUBLE_EQ(r.map, 1.0) << protocol_name(p);
  }
}

TEST(EvaluateTest, CocoSummaryBuckets) {
  EvalConfig cfg;
  cfg.protocol = ApProtocol::kCocoAverage;
  const auto gts = testing::eval_fixture_gt();
  const auto r = evaluate(testing::perfect_dets(gts), gts, cfg);
  ASSERT_TRUE(r.coco.has_value());
  EXPECT_DOUBLE_EQ(*r.coco->ap50, 1.0);
  EXPECT_DOUBLE_EQ(*r.coco->ap75, 1.0);
  // Smallest fixture box is 40x40 = 1600 px^2, so no small objects.
  EXPECT_FALSE(r.coco->ap_small.has_value());
  EXPECT_DOUBLE_EQ(*r.coco->ap_medium, 1.0);
  EXPECT_DOUBLE_EQ(*r.coco->ap_large, 1.0);
}

TEST(EvaluateTest, UnknownImagesAndMissingClasses) {
  auto dets = testing::eval_fixture_dets();
  dets.push_back({"zzz", 0, 0.99, 0, 0, 10, 10});
  dets.push_back({"a", 5, 0.99, 0, 0, 10, 10});
  const auto r = evaluate(dets, testing::eval_fixture_gt());
  ASSERT_EQ(r.unknown_images.size(), 1u);
  EXPECT_EQ(r.unknown_images[0], "zzz");
  EXPECT_NEAR(r.map, (8.4 / 11 + 0.5) / 2, 1e-12);
  EXPECT_FALSE(r.notes.empty());
}

TEST(EvaluateTest, InputOrderDoesNotMatter) {
  auto dets = testing::eval_fixture_dets();
  std::mt19937_64 rng(8);
  std::shuffle(dets.begin(), dets.end(), rng);
  auto gts = testing::eval_fixture_gt();
  std::reverse(gts.begin(), gts.end());
  EXPECT_NEAR(evaluate(dets, gts).map, (8.4 / 11 + 0.5) / 2, 1e-12);
}

TEST(EvaluateTest, BadConfig) {
  EvalConfig cfg;
  cfg.iou_threshold = 0.0;
  EXPECT_THROW(evaluate(testing::eval_fixture_dets(), testing::eval_fixture_gt(), cfg), ValidationError);
  EXPECT_THROW(parse_protocol("bogus"), ValidationError);
  EXPECT_EQ(parse_protocol("voc11"), ApProtocol::kVoc11Point);
}

TEST(EvaluateTest, ReportFormats) {
  const auto r = evaluate(testing::eval_fixture_dets(), testing::eval_fixture_gt());
  const std::string text = format_report(r);
  EXPECT_NE(text.find("VOC11point"), std::string::npos);
  const std::string json = report_json(r);
  EXPECT_NE(json.find("\"mAP\""), std::string::npos);
}

}  // namespace
}  // namespace mgd
