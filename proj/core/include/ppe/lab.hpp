// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppe/eds.hpp"
#include "ppe/grid.hpp"
#include "ppe/label_codec.hpp"
#include "ppe/metrics.hpp"

namespace ppe {

/// Filled shape in continuous pixel coordinates (pixel (r, c) has its
/// centre at (r + 0.5, c + 0.5)). A pixel is inside a circle when its
/// centre is within `radius` of (center_row, center_col); rectangles cover
/// rows [top, bottom) and columns [left, right).
struct Shape {
  enum class Kind { kCircle, kRectangle };
  Kind kind = Kind::kCircle;
  double center_row = 0.0;
  double center_col = 0.0;
  double radius = 0.0;
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;
  std::uint32_t class_id = 1;

  static Shape circle(double center_row, double center_col, double radius,
                      std::uint32_t class_id = 1);
  static Shape rectangle(int top, int left, int bottom, int right,
                         std::uint32_t class_id = 1);
};

/// Shapes are painted in order, later ones occluding earlier ones. Shape k
/// becomes instance id k + 1.
struct SceneSpec {
  int height = 0;
  int width = 0;
  std::vector<Shape> shapes;
  std::uint64_t seed = 0;
  bool void_background = true;
  std::uint32_t background_class = 0;  // used when void_background is false
};

struct Scene {
  IdMap instances;
  IdMap semantics;
};

/// Rasterises the spec. Throws DomainError for shapes leaving the image.
Scene generate_scene(const SceneSpec& spec);

/// Parameters of the random scene family used by the lab suites.
struct RandomSceneOptions {
  int height = 64;
  int width = 64;
  int min_tile = 4;       // smallest rectangle side produced by splitting
  int max_tiles = 14;     // guillotine leaves
  double void_fraction = 0.2;
  int circles = 2;        // small circles painted over the tiling
  double min_radius = 2.5;
  double max_radius = 7.0;
  std::uint32_t num_classes = 4;  // classes 1..num_classes
};

/// Deterministic for a given seed: a guillotine tiling of the image into
/// rectangles (some left void) with a few circles painted on top.
SceneSpec random_scene_spec(const RandomSceneOptions& options, std::uint64_t seed);

/// The committed fixed-seed scene suite.
std::vector<Scene> fixed_suite(std::size_t count = 8, std::uint64_t seed = 20250101);

struct CrossAssignment {
  Pixel pixel;
  std::uint32_t own = 0;
  std::uint32_t neighbor = 0;
  double centroid_distance = 0.0;  // |du| + |dv| in normalised coordinates
  double loss = 0.0;
};

struct LossScaleReport {
  std::vector<CrossAssignment> records;
  double mean_loss = 0.0;
  /// Pearson correlation of loss with centroid distance; unset if either
  /// has zero variance.
  std::optional<double> correlation;
  /// Population standard deviation over mean of the loss; unset if the
  /// mean is zero.
  std::optional<double> coefficient_of_variation;
};

/// For each pixel with a 4-neighbour of a different labeled instance (one
/// record per distinct neighbour instance), the per-pixel loss incurred if
/// the pixel were predicted with the neighbour's target. Direct encoding
/// uses the RGB target with mean absolute error, positional the two-half
/// Euclidean loss. Throws DomainError without any inter-instance boundary.
LossScaleReport loss_scale_analysis(const IdMap& instances, const Encoding& encoding);

/// Two non-overlapping filled circles on a void background.
struct CircleLayout {
  int height = 0;
  int width = 0;
  double small_row = 0.0;
  double small_col = 0.0;
  double small_radius = 0.0;
  double large_row = 0.0;
  double large_col = 0.0;
  double large_radius = 0.0;

  /// Side-by-side layout for radii R and 2R with a margin of 4D.
  static CircleLayout standard(double radius, double falloff);
};

/// Summed EDS weight inside the large circle over the one inside the small
/// circle. Throws DomainError for overlapping or out-of-image circles.
double circle_weight_ratio(const CircleLayout& layout, const EDSConfig& cfg);

/// Standard layout; requires R >= 8 D.
double circle_weight_ratio(double radius, const EDSConfig& cfg);

/// Settings of the coupled linear toy model.
struct ToyTrainConfig {
  Encoding encoding = Encoding::positional(4);
  bool use_eds = true;
  EDSConfig eds;
  int steps = 500;
  double learning_rate = 0.5;
  int hash_features = 24;
  std::uint64_t seed = 7;
  PEConfig grid = PEConfig::coco();
  std::vector<double> size_thresholds = {64.0, 256.0, 1024.0};
};

struct ToyTrainResult {
  IoUBySize table;
  std::vector<double> loss_history;  // loss before each step, plus final
};

/// Per-pixel features are a hash embedding of (scene, true instance id)
/// followed by the pixel's normalised coordinates and a bias. One linear
/// map shared by all pixels of all scenes is trained with plain gradient
/// descent on the instance loss of the chosen encoding, then predictions
/// are decoded over the grid, grouped by decoded cell and scored with
/// iou_by_size. Throws DivergenceError on a non-finite loss.
ToyTrainResult toy_coupled_train(std::span<const Scene> suite, const ToyTrainConfig& cfg);

std::string loss_scale_report_json(const LossScaleReport& report);
std::string loss_scale_report_csv(const LossScaleReport& report);
std::string toy_train_json(const ToyTrainResult& result, const ToyTrainConfig& cfg);

}  // namespace ppe
