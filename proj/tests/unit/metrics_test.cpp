// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include "ppe/error.hpp"
#include "ppe/metrics.hpp"
#include "support.hpp"

namespace ppe {
namespace {

PanopticSeg things(const IdMap& m) { return panoptic_from_ids(m, 1); }

TEST(PanopticQuality, IdenticalIsOne) {
  Rng rng(1);
  const IdMap m = testing::random_blocky_map(rng, 10, 10, 4, 5);
  const PQReport r = panoptic_quality(things(m), things(m));
  EXPECT_EQ(r.pq(), 1.0);
  EXPECT_EQ(r.sq(), 1.0);
  EXPECT_EQ(r.rq(), 1.0);
}

TEST(PanopticQuality, HalfCoverageIsNotAMatch) {
  const IdMap truth(1, 4, {1, 1, 1, 1});
  const IdMap pred(1, 4, {1, 1, 0, 0});
  const PQReport r = panoptic_quality(things(pred), things(truth));
  EXPECT_EQ(r.pq(), 0.0);
  EXPECT_EQ(r.tp, 0);
  EXPECT_EQ(r.fn, 1);
  EXPECT_EQ(r.fp, 1);
}

TEST(PanopticQuality, OneMatchedOneMissed) {
  const IdMap truth(1, 8, {1, 1, 1, 1, 1, 2, 2, 2});
  const IdMap pred(1, 8, {1, 1, 1, 1, 0, 0, 0, 0});
  const PQReport r = panoptic_quality(things(pred), things(truth));
  EXPECT_NEAR(r.pq(), 0.8 / 1.5, 1e-12);
  EXPECT_NEAR(r.sq(), 0.8, 1e-12);
  EXPECT_NEAR(r.rq(), 1.0 / 1.5, 1e-12);
  EXPECT_EQ(r.per_category.size(), 1u);
}

TEST(PanopticQuality, TruthVoidLeftOutOfUnion) {
  // Prediction spills two pixels into truth void: IoU stays 1.
  const IdMap truth(1, 5, {1, 1, 1, 0, 0});
  const IdMap pred(1, 5, {1, 1, 1, 1, 1});
  EXPECT_EQ(panoptic_quality(things(pred), things(truth)).pq(), 1.0);
}

TEST(PanopticQuality, PredictionsMostlyInVoidAreIgnored) {
  const IdMap truth(1, 6, {1, 1, 0, 0, 0, 0});
  const IdMap pred(1, 6, {1, 1, 0, 2, 2, 2});
  const PQReport r = panoptic_quality(things(pred), things(truth));
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.pq(), 1.0);
}

TEST(PanopticQuality, CategoryMismatchNeverMatches) {
  const IdMap m(1, 2, {1, 1});
  const PQReport r = panoptic_quality(panoptic_from_ids(m, 2), panoptic_from_ids(m, 1));
  EXPECT_EQ(r.pq(), 0.0);
  EXPECT_EQ(r.per_category.size(), 2u);
}

TEST(PanopticQuality, ThingStuffSplit) {
  const CategoryTable cats({{1, "car", true}, {2, "road", false}});
  const IdMap inst(1, 4, {1, 1, 0, 0});
  const IdMap sem(1, 4, {1, 1, 2, 2});
  const PanopticSeg truth = panoptic_from_labels(inst, sem, cats);
  const PanopticSeg pred = panoptic_from_labels(IdMap(1, 4, {0, 0, 0, 0}), sem, cats);
  const PQReport r = panoptic_quality(pred, truth);
  ASSERT_TRUE(r.things && r.stuff);
  EXPECT_EQ(r.things->pq, 0.0);
  EXPECT_EQ(r.stuff->pq, 1.0);
  EXPECT_EQ(r.pq(), 0.5);
}

TEST(PanopticQuality, PermutationInvariantAndBounded) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const IdMap t = testing::random_blocky_map(rng, 12, 12, 5, 6);
    const IdMap p = testing::random_blocky_map(rng, 12, 12, 5, 6);
    const double pq = panoptic_quality(things(p), things(t)).pq();
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    const double pq2 = panoptic_quality(things(testing::permute_ids(p, trial)),
                                        things(testing::permute_ids(t, trial + 99)))
                           .pq();
    EXPECT_EQ(pq, pq2);
  }
}

TEST(PQAccumulator, MergeEqualsSequentialAdds) {
  Rng rng(3);
  PQAccumulator all;
  PQAccumulator a;
  PQAccumulator b;
  for (int k = 0; k < 6; ++k) {
    const IdMap t = testing::random_blocky_map(rng, 8, 8, 4, 4);
    const IdMap p = testing::random_blocky_map(rng, 8, 8, 4, 4);
    all.add(things(p), things(t));
    (k % 2 ? a : b).add(things(p), things(t));
  }
  a.merge(b);
  EXPECT_NEAR(a.report().pq(), all.report().pq(), 1e-15);
  EXPECT_EQ(a.report().tp, all.report().tp);
}

TEST(PanopticQuality, RejectsSizeMismatch) {
  EXPECT_THROW(panoptic_quality(things(IdMap::filled(1, 2, 1)), things(IdMap::filled(2, 1, 1))),
               ShapeError);
}

TEST(IouBySize, PerfectAndEmpty) {
  const IdMap t(1, 6, {1, 1, 2, 2, 2, 2});
  const std::vector<double> thr = {3.0};
  const IoUBySize perfect = iou_by_size(t, t, thr);
  ASSERT_EQ(perfect.bins.size(), 2u);
  EXPECT_EQ(*perfect.bins[0].mean_iou, 1.0);
  EXPECT_EQ(*perfect.bins[1].mean_iou, 1.0);
  const IoUBySize empty = iou_by_size(IdMap::filled(1, 6), t, thr);
  EXPECT_EQ(*empty.bins[0].mean_iou, 0.0);
  EXPECT_EQ(*empty.bins[1].mean_iou, 0.0);
}

TEST(IouBySize, HalfCoveredInstance) {
  const IdMap t(1, 6, {1, 1, 2, 2, 2, 2});
  const IdMap p(1, 6, {1, 1, 2, 2, 0, 0});
  const std::vector<double> thr = {3.0};
  const IoUBySize r = iou_by_size(p, t, thr);
  EXPECT_EQ(*r.bins[0].mean_iou, 1.0);
  EXPECT_EQ(*r.bins[1].mean_iou, 0.5);
  EXPECT_EQ(r.bins[0].count, 1);
  EXPECT_FALSE(r.bins[1].upper.has_value());
}

TEST(IouBySize, EmptyBinsAndValidation) {
  const IdMap t(1, 2, {1, 1});
  const std::vector<double> thr = {10.0, 100.0};
  const IoUBySize r = iou_by_size(t, t, thr);
  EXPECT_FALSE(r.bins[1].mean_iou.has_value());
  EXPECT_FALSE(r.bins[2].mean_iou.has_value());
  const std::vector<double> bad = {5.0, 5.0};
  EXPECT_THROW(iou_by_size(t, t, bad), DomainError);
}

TEST(IouBySize, InvariantToPredictionPermutation) {
  Rng rng(4);
  const std::vector<double> thr = {4.0, 16.0};
  for (int trial = 0; trial < 20; ++trial) {
    const IdMap t = testing::random_blocky_map(rng, 10, 10, 5, 5);
    const IdMap p = testing::random_blocky_map(rng, 10, 10, 5, 5);
    const IoUBySize a = iou_by_size(p, t, thr);
    const IoUBySize b = iou_by_size(testing::permute_ids(p, trial), t, thr);
    for (std::size_t k = 0; k < a.bins.size(); ++k) EXPECT_EQ(a.bins[k].mean_iou, b.bins[k].mean_iou);
  }
}

TEST(Reports, StableLayouts) {
  const IdMap truth(1, 8, {1, 1, 1, 1, 1, 2, 2, 2});
  const IdMap pred(1, 8, {1, 1, 1, 1, 0, 0, 0, 0});
  const PQReport r = panoptic_quality(things(pred), things(truth));
  EXPECT_EQ(pq_report_csv(r),
            "category_id,isthing,pq,sq,rq,tp,fp,fn\n"
            "1,1,0.5333333333333333,0.8,0.6666666666666666,1,0,1\n"
            "all,,0.5333333333333333,0.8,0.6666666666666666,1,0,1\n");
  const auto j = nlohmann::json::parse(pq_report_json(r));
  EXPECT_EQ(j["tp"], 1);
  EXPECT_TRUE(j["stuff"].is_null());
  const std::vector<double> thr = {3.0};
  EXPECT_EQ(iou_by_size_csv(iou_by_size(pred, truth, thr)),
            "bin_lower,bin_upper,count,mean_iou\n0,3,0,\n3,,2,0.4\n");
}

}  // namespace
}  // namespace ppe
