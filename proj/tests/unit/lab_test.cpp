// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ppe/error.hpp"
#include "ppe/lab.hpp"
#include "support.hpp"

namespace ppe {
namespace {

TEST(GenerateScene, EmptyAndFull) {
  const Scene empty = generate_scene({5, 6, {}});
  EXPECT_EQ(empty.instances, IdMap::filled(5, 6));
  const Scene full = generate_scene({5, 6, {Shape::rectangle(0, 0, 5, 6, 3)}});
  EXPECT_EQ(full.instances, IdMap::filled(5, 6, 1));
  EXPECT_EQ(full.semantics, IdMap::filled(5, 6, 3));
}

TEST(GenerateScene, CircleRasterCount) {
  const Scene s = generate_scene({64, 64, {Shape::circle(32.0, 32.0, 10.0)}});
  std::int64_t count = 0;
  for (auto id : s.instances.ids()) count += id == 1 ? 1 : 0;
  std::int64_t expected = 0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const double dr = r + 0.5 - 32.0;
      const double dc = c + 0.5 - 32.0;
      expected += dr * dr + dc * dc <= 100.0 ? 1 : 0;
    }
  }
  EXPECT_EQ(count, expected);
  EXPECT_GE(count, 296);
  EXPECT_LE(count, 334);
}

TEST(GenerateScene, LaterShapesOccludeAndBoundsAreChecked) {
  const Scene s = generate_scene(
      {4, 4, {Shape::rectangle(0, 0, 4, 4, 1), Shape::rectangle(1, 1, 3, 3, 2)}});
  EXPECT_EQ(s.instances.at(0, 0), 1u);
  EXPECT_EQ(s.instances.at(1, 1), 2u);
  EXPECT_EQ(s.semantics.at(2, 2), 2u);
  EXPECT_THROW(generate_scene({4, 4, {Shape::rectangle(0, 0, 5, 4)}}), DomainError);
  EXPECT_THROW(generate_scene({4, 4, {Shape::circle(1.0, 2.0, 1.5)}}), DomainError);
  EXPECT_THROW(generate_scene({4, 4, {Shape::rectangle(2, 2, 2, 3)}}), DomainError);
}

TEST(RandomScenes, DeterministicPerSeed) {
  const RandomSceneOptions options;
  const Scene a = generate_scene(random_scene_spec(options, 42));
  const Scene b = generate_scene(random_scene_spec(options, 42));
  const Scene c = generate_scene(random_scene_spec(options, 43));
  EXPECT_EQ(a.instances, b.instances);
  EXPECT_EQ(a.semantics, b.semantics);
  EXPECT_NE(a.instances, c.instances);
  const auto suite1 = fixed_suite(3);
  const auto suite2 = fixed_suite(3);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(suite1[k].instances, suite2[k].instances);
}

TEST(RandomScenes, ShapesRespectBoundsAndTileSize) {
  RandomSceneOptions options;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SceneSpec spec = random_scene_spec(options, seed);
    EXPECT_NO_THROW(generate_scene(spec));
    for (const Shape& s : spec.shapes) {
      EXPECT_GE(s.class_id, 1u);
      EXPECT_LE(s.class_id, options.num_classes);
      if (s.kind == Shape::Kind::kRectangle) {
        EXPECT_GE(s.bottom - s.top, options.min_tile);
        EXPECT_GE(s.right - s.left, options.min_tile);
      }
    }
  }
}

TEST(LossScale, DirectLossIsProportionalToCentroidDistance) {
  for (const Scene& s : fixed_suite(4)) {
    const LossScaleReport r = loss_scale_analysis(s.instances, Encoding::direct());
    for (const auto& rec : r.records) EXPECT_NEAR(rec.loss, rec.centroid_distance / 6.0, 1e-15);
    ASSERT_TRUE(r.correlation.has_value());
    EXPECT_NEAR(*r.correlation, 1.0, 1e-12);
  }
}

TEST(LossScale, PositionalLossMatchesEmbeddingDistance) {
  const IdMap m(2, 4, {1, 1, 2, 2, 1, 1, 2, 2});
  const LossScaleReport r = loss_scale_analysis(m, Encoding::positional(4));
  ASSERT_EQ(r.records.size(), 4u);
  const auto a = testing::reference_code(-0.5, 0.0, 4);
  const auto b = testing::reference_code(0.5, 0.0, 4);
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.loss, testing::reference_distance(a, b), 1e-12);
    EXPECT_NEAR(rec.centroid_distance, 1.0, 1e-15);
  }
  EXPECT_FALSE(r.correlation.has_value());
  ASSERT_TRUE(r.coefficient_of_variation.has_value());
  EXPECT_NEAR(*r.coefficient_of_variation, 0.0, 1e-12);
}

TEST(LossScale, IdenticalCentroidsGiveZeroLoss) {
  // Checkerboard quadrants: both instances are centred on the image.
  const IdMap m(4, 4, {1, 1, 2, 2, 1, 1, 2, 2, 2, 2, 1, 1, 2, 2, 1, 1});
  for (Encoding e : {Encoding::direct(), Encoding::positional(4)}) {
    const LossScaleReport r = loss_scale_analysis(m, e);
    EXPECT_FALSE(r.records.empty());
    for (const auto& rec : r.records) EXPECT_NEAR(rec.loss, 0.0, 1e-12);
    EXPECT_FALSE(r.coefficient_of_variation.has_value());
  }
  EXPECT_THROW(loss_scale_analysis(IdMap::filled(3, 3, 1), Encoding::direct()), DomainError);
}

TEST(CircleRatio, UniformWeightsGiveAreaRatio) {
  const double r = circle_weight_ratio(40.0, {1.0, 5.0});
  EXPECT_GT(r, 3.9);
  EXPECT_LT(r, 4.1);
}

TEST(CircleRatio, DecreasesTowardPerimeterRatio) {
  double previous = 4.0;
  for (double d : {5.0, 2.5, 1.0, 0.5}) {
    const double r = circle_weight_ratio(40.0, {0.0, d});
    EXPECT_LT(r, previous) << "D = " << d;
    previous = r;
  }
  EXPECT_NEAR(previous, 2.0, 0.1);
}

TEST(CircleRatio, IncreasesWithWeightFloor) {
  double previous = 0.0;
  for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double r = circle_weight_ratio(40.0, {w, 5.0});
    EXPECT_GT(r, previous);
    previous = r;
  }
}

TEST(CircleRatio, Preconditions) {
  EXPECT_THROW(circle_weight_ratio(100.0, {0.0, 20.0}), DomainError);
  CircleLayout overlap = CircleLayout::standard(10.0, 1.0);
  overlap.large_col = overlap.small_col + 5.0;
  EXPECT_THROW(circle_weight_ratio(overlap, {0.0, 1.0}), DomainError);
}

std::vector<Scene> tiny_suite() {
  RandomSceneOptions options;
  options.height = 24;
  options.width = 24;
  options.max_tiles = 6;
  options.circles = 1;
  return {generate_scene(random_scene_spec(options, 1)),
          generate_scene(random_scene_spec(options, 2))};
}

TEST(ToyTrain, UntrainedModelDecodesToVoid) {
  ToyTrainConfig cfg;
  cfg.steps = 0;
  const auto suite = tiny_suite();
  const ToyTrainResult r = toy_coupled_train(suite, cfg);
  ASSERT_EQ(r.loss_history.size(), 1u);
  for (const SizeBin& b : r.table.bins) {
    if (b.count > 0) EXPECT_EQ(*b.mean_iou, 0.0);
  }
}

TEST(ToyTrain, DeterministicAndLossDecreases) {
  ToyTrainConfig cfg;
  cfg.steps = 40;
  const auto suite = tiny_suite();
  const ToyTrainResult a = toy_coupled_train(suite, cfg);
  const ToyTrainResult b = toy_coupled_train(suite, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(toy_train_json(a, cfg), toy_train_json(b, cfg));
  EXPECT_LT(a.loss_history.back(), a.loss_history.front());
  ToyTrainConfig direct = cfg;
  direct.encoding = Encoding::direct();
  direct.use_eds = false;
  const ToyTrainResult d = toy_coupled_train(suite, direct);
  EXPECT_LT(d.loss_history.back(), d.loss_history.front());
}

TEST(ToyTrain, DivergenceIsReported) {
  ToyTrainConfig cfg;
  cfg.encoding = Encoding::direct();
  cfg.steps = 50;
  cfg.learning_rate = 1e306;
  const auto suite = tiny_suite();
  try {
    toy_coupled_train(suite, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("learning rate"), std::string::npos);
  }
}

TEST(Reports, LossScaleCsvHeader) {
  const IdMap m(1, 2, {1, 2});
  const std::string csv = loss_scale_report_csv(loss_scale_analysis(m, Encoding::direct()));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "row,col,own,neighbor,centroid_distance,loss");
}

}  // namespace
}  // namespace ppe
