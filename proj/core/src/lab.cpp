// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "ppe/error.hpp"
#include "ppe/losses.hpp"
#include "ppe/panoptic.hpp"
#include "ppe/rng.hpp"

namespace ppe {
namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void check_shape_bounds(const Shape& s, int height, int width) {
  if (s.kind == Shape::Kind::kCircle) {
    if (!(s.radius > 0.0)) throw DomainError("circle radius must be positive");
    if (s.center_row - s.radius < 0.0 || s.center_row + s.radius > height ||
        s.center_col - s.radius < 0.0 || s.center_col + s.radius > width) {
      throw DomainError("circle exceeds the image bounds");
    }
  } else {
    if (s.top < 0 || s.left < 0 || s.bottom > height || s.right > width ||
        s.top >= s.bottom || s.left >= s.right) {
      throw DomainError("rectangle is empty or exceeds the image bounds");
    }
  }
}

std::vector<double> target_code(const Centroid& c, const Encoding& encoding) {
  if (encoding.is_direct()) return {0.5 * (c.u + 1.0), 0.5 * (c.v + 1.0), 1.0};
  std::vector<double> code(4 * static_cast<std::size_t>(encoding.harmonics));
  const std::size_t half = code.size() / 2;
  gamma_into(c.u, encoding.harmonics, std::span<double>(code).first(half));
  gamma_into(c.v, encoding.harmonics, std::span<double>(code).subspan(half));
  return code;
}

double code_loss(const std::vector<double>& pred, const std::vector<double>& target,
                 const Encoding& encoding) {
  if (encoding.is_direct()) {
    double sum = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) sum += std::abs(pred[k] - target[k]);
    return sum / static_cast<double>(pred.size());
  }
  return embedding_distance(pred, target);
}

struct Rect {
  int top, left, bottom, right;
  int rows() const { return bottom - top; }
  int cols() const { return right - left; }
  std::int64_t area() const { return static_cast<std::int64_t>(rows()) * cols(); }
};

}  // namespace

Shape Shape::circle(double center_row, double center_col, double radius,
                    std::uint32_t class_id) {
  Shape s;
  s.kind = Kind::kCircle;
  s.center_row = center_row;
  s.center_col = center_col;
  s.radius = radius;
  s.class_id = class_id;
  return s;
}

Shape Shape::rectangle(int top, int left, int bottom, int right, std::uint32_t class_id) {
  Shape s;
  s.kind = Kind::kRectangle;
  s.top = top;
  s.left = left;
  s.bottom = bottom;
  s.right = right;
  s.class_id = class_id;
  return s;
}

Scene generate_scene(const SceneSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) throw DomainError("scene dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(spec.height) * spec.width;
  const std::uint32_t background = spec.void_background ? kVoidId : spec.background_class;
  std::vector<std::uint32_t> inst(n, kVoidId);
  std::vector<std::uint32_t> sem(n, background);
  for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
    const Shape& s = spec.shapes[k];
    check_shape_bounds(s, spec.height, spec.width);
    const auto id = static_cast<std::uint32_t>(k + 1);
    const auto paint = [&](int r, int c) {
      const std::size_t i = static_cast<std::size_t>(r) * spec.width + c;
      inst[i] = id;
      sem[i] = s.class_id;
    };
    if (s.kind == Shape::Kind::kRectangle) {
      for (int r = s.top; r < s.bottom; ++r) {
        for (int c = s.left; c < s.right; ++c) paint(r, c);
      }
      continue;
    }
    const int r0 = std::max(0, static_cast<int>(std::floor(s.center_row - s.radius)));
    const int r1 = std::min(spec.height - 1, static_cast<int>(std::ceil(s.center_row + s.radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(s.center_col - s.radius)));
    const int c1 = std::min(spec.width - 1, static_cast<int>(std::ceil(s.center_col + s.radius)));
    const double r2 = s.radius * s.radius;
    for (int r = r0; r <= r1; ++r) {
      const double dr = r + 0.5 - s.center_row;
      for (int c = c0; c <= c1; ++c) {
        const double dc = c + 0.5 - s.center_col;
        if (dr * dr + dc * dc <= r2) paint(r, c);
      }
    }
  }
  return Scene{IdMap(spec.height, spec.width, std::move(inst)),
               IdMap(spec.height, spec.width, std::move(sem))};
}

SceneSpec random_scene_spec(const RandomSceneOptions& options, std::uint64_t seed) {
  if (options.height < options.min_tile || options.width < options.min_tile ||
      options.min_tile < 1 || options.num_classes < 1) {
    throw DomainError("random_scene_spec: invalid options");
  }
  Rng rng(seed);
  std::vector<Rect> leaves = {{0, 0, options.height, options.width}};
  while (static_cast<int>(leaves.size()) < options.max_tiles) {
    // Pick a splittable leaf with probability proportional to its area.
    std::vector<std::size_t> candidates;
    std::int64_t total = 0;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      if (leaves[k].rows() >= 2 * options.min_tile || leaves[k].cols() >= 2 * options.min_tile) {
        candidates.push_back(k);
        total += leaves[k].area();
      }
    }
    if (candidates.empty()) break;
    auto pick = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(total));
    std::size_t chosen = candidates.back();
    for (std::size_t k : candidates) {
      if (pick < leaves[k].area()) {
        chosen = k;
        break;
      }
      pick -= leaves[k].area();
    }
    const Rect leaf = leaves[chosen];
    const bool can_rows = leaf.rows() >= 2 * options.min_tile;
    const bool can_cols = leaf.cols() >= 2 * options.min_tile;
    const bool split_rows = can_rows && (!can_cols || leaf.rows() >= leaf.cols());
    Rect a = leaf;
    Rect b = leaf;
    if (split_rows) {
      const int cut = rng.uniform_int(leaf.top + options.min_tile, leaf.bottom - options.min_tile);
      a.bottom = cut;
      b.top = cut;
    } else {
      const int cut = rng.uniform_int(leaf.left + options.min_tile, leaf.right - options.min_tile);
      a.right = cut;
      b.left = cut;
    }
    leaves[chosen] = a;
    leaves.push_back(b);
  }

  SceneSpec spec;
  spec.height = options.height;
  spec.width = options.width;
  spec.seed = seed;
  for (const Rect& leaf : leaves) {
    const bool is_void = rng.bernoulli(options.void_fraction);
    const auto cls =
        static_cast<std::uint32_t>(rng.uniform_int(1, static_cast<int>(options.num_classes)));
    if (is_void) continue;
    spec.shapes.push_back(Shape::rectangle(leaf.top, leaf.left, leaf.bottom, leaf.right, cls));
  }
  for (int k = 0; k < options.circles; ++k) {
    const double radius = rng.uniform(options.min_radius, options.max_radius);
    const double row = rng.uniform(radius, options.height - radius);
    const double col = rng.uniform(radius, options.width - radius);
    const auto cls =
        static_cast<std::uint32_t>(rng.uniform_int(1, static_cast<int>(options.num_classes)));
    spec.shapes.push_back(Shape::circle(row, col, radius, cls));
  }
  return spec;
}

std::vector<Scene> fixed_suite(std::size_t count, std::uint64_t seed) {
  std::vector<Scene> suite;
  RandomSceneOptions options;
  for (std::size_t k = 0; k < count; ++k) {
    suite.push_back(generate_scene(random_scene_spec(options, hash_words(seed, k))));
  }
  return suite;
}

LossScaleReport loss_scale_analysis(const IdMap& instances, const Encoding& encoding) {
  if (!encoding.is_direct() && encoding.harmonics < 1) {
    throw DomainError("loss_scale_analysis: harmonics must be >= 1");
  }
  const auto centroids = instance_centroids(instances);
  std::map<std::uint32_t, std::vector<double>> codes;
  for (const auto& [id, c] : centroids) codes.emplace(id, target_code(c, encoding));

  LossScaleReport report;
  const int h = instances.height();
  const int w = instances.width();
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::uint32_t own = instances.at(r, c);
      if (own == kVoidId) continue;
      std::set<std::uint32_t> seen;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + kDr[k];
        const int cc = c + kDc[k];
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const std::uint32_t other = instances.at(rr, cc);
        if (other == kVoidId || other == own || !seen.insert(other).second) continue;
        const Centroid& a = centroids.at(own);
        const Centroid& b = centroids.at(other);
        CrossAssignment rec;
        rec.pixel = {r, c};
        rec.own = own;
        rec.neighbor = other;
        rec.centroid_distance = std::abs(a.u - b.u) + std::abs(a.v - b.v);
        rec.loss = code_loss(codes.at(other), codes.at(own), encoding);
        report.records.push_back(rec);
      }
    }
  }
  if (report.records.empty()) {
    throw DomainError("loss_scale_analysis: no boundary between two instances");
  }

  const double n = static_cast<double>(report.records.size());
  double mean_loss = 0.0;
  double mean_dist = 0.0;
  for (const auto& rec : report.records) {
    mean_loss += rec.loss;
    mean_dist += rec.centroid_distance;
  }
  mean_loss /= n;
  mean_dist /= n;
  double var_loss = 0.0;
  double var_dist = 0.0;
  double cov = 0.0;
  for (const auto& rec : report.records) {
    const double dl = rec.loss - mean_loss;
    const double dd = rec.centroid_distance - mean_dist;
    var_loss += dl * dl;
    var_dist += dd * dd;
    cov += dl * dd;
  }
  report.mean_loss = mean_loss;
  if (var_loss > 0.0 && var_dist > 0.0) {
    report.correlation = cov / std::sqrt(var_loss * var_dist);
  }
  if (mean_loss > 0.0) {
    report.coefficient_of_variation = std::sqrt(var_loss / n) / mean_loss;
  }
  return report;
}

CircleLayout CircleLayout::standard(double radius, double falloff) {
  const double margin = std::max(4.0, std::ceil(4.0 * falloff));
  CircleLayout layout;
  layout.height = static_cast<int>(std::ceil(4.0 * radius + 2.0 * margin));
  layout.width = static_cast<int>(std::ceil(6.0 * radius + 3.0 * margin));
  layout.small_radius = radius;
  layout.large_radius = 2.0 * radius;
  layout.small_row = layout.height / 2.0;
  layout.large_row = layout.height / 2.0;
  layout.small_col = margin + radius;
  layout.large_col = 2.0 * margin + 4.0 * radius;
  return layout;
}

double circle_weight_ratio(const CircleLayout& layout, const EDSConfig& cfg) {
  cfg.validate();
  const double dr = layout.small_row - layout.large_row;
  const double dc = layout.small_col - layout.large_col;
  if (std::sqrt(dr * dr + dc * dc) <= layout.small_radius + layout.large_radius) {
    throw DomainError("circle_weight_ratio: circles overlap");
  }
  SceneSpec spec;
  spec.height = layout.height;
  spec.width = layout.width;
  spec.shapes = {Shape::circle(layout.small_row, layout.small_col, layout.small_radius),
                 Shape::circle(layout.large_row, layout.large_col, layout.large_radius)};
  const Scene scene = generate_scene(spec);
  const WeightMask weights = eds_weights(scene.instances, cfg);
  double small_sum = 0.0;
  double large_sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::uint32_t id = scene.instances[i];
    if (id == 1) small_sum += weights[i];
    if (id == 2) large_sum += weights[i];
  }
  if (!(small_sum > 0.0)) throw DomainError("circle_weight_ratio: small circle has no weight");
  return large_sum / small_sum;
}

double circle_weight_ratio(double radius, const EDSConfig& cfg) {
  cfg.validate();
  if (!(radius >= 8.0 * cfg.falloff)) {
    throw DomainError("circle_weight_ratio: requires R >= 8 D");
  }
  return circle_weight_ratio(CircleLayout::standard(radius, cfg.falloff), cfg);
}

ToyTrainResult toy_coupled_train(std::span<const Scene> suite, const ToyTrainConfig& cfg) {
  if (suite.empty()) throw DomainError("toy_coupled_train: empty suite");
  if (cfg.steps < 0 || cfg.hash_features < 1 || !(cfg.learning_rate > 0.0)) {
    throw DomainError("toy_coupled_train: invalid configuration");
  }
  const bool direct = cfg.encoding.is_direct();
  PEConfig grid_cfg = cfg.grid;
  grid_cfg.harmonics = direct ? 1 : cfg.encoding.harmonics;
  const UVGrid grid(grid_cfg);
  const int out_dim = direct ? 3 : grid_cfg.pixel_dim();
  const int feat_dim = cfg.hash_features + 3;

  struct Prepared {
    Field target;
    WeightMask weights;
    double weight_total = 0.0;
    std::vector<double> features;  // pixel-major, feat_dim per pixel
  };
  std::vector<Prepared> data;
  double weight_total = 0.0;
  for (std::size_t s = 0; s < suite.size(); ++s) {
    const IdMap& inst = suite[s].instances;
    Prepared p;
    p.target = direct ? encode_rgb_direct(inst) : encode_pe(inst, grid_cfg);
    p.weights = cfg.use_eds ? eds_weights(inst, cfg.eds)
                            : WeightMask::uniform(inst.height(), inst.width(), 1.0);
    for (double w : p.weights.weights()) p.weight_total += w;
    weight_total += p.weight_total;
    std::map<std::uint32_t, std::vector<double>> hashed;
    p.features.resize(inst.size() * feat_dim);
    for (int r = 0; r < inst.height(); ++r) {
      for (int c = 0; c < inst.width(); ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * inst.width() + c;
        auto [it, inserted] = hashed.try_emplace(inst[i]);
        if (inserted) {
          it->second.resize(cfg.hash_features);
          for (int k = 0; k < cfg.hash_features; ++k) {
            Rng rng(hash_words(cfg.seed, s, inst[i], static_cast<std::uint64_t>(k)));
            it->second[k] = rng.uniform(-1.0, 1.0);
          }
        }
        double* f = p.features.data() + i * feat_dim;
        std::copy(it->second.begin(), it->second.end(), f);
        f[cfg.hash_features] = normalize_coord(c, inst.width());
        f[cfg.hash_features + 1] = normalize_coord(r, inst.height());
        f[cfg.hash_features + 2] = 1.0;
      }
    }
    data.push_back(std::move(p));
  }
  if (!(weight_total > 0.0)) throw DomainError("toy_coupled_train: suite has no weighted pixel");

  std::vector<double> params(static_cast<std::size_t>(out_dim) * feat_dim, 0.0);
  int step = 0;
  const auto diverged = [&]() {
    throw DivergenceError("toy_coupled_train: loss became non-finite at step " +
                          std::to_string(step) + "; lower the learning rate (currently " +
                          num(cfg.learning_rate) + ")");
  };
  const auto predict = [&](const Prepared& p, int height, int width) {
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::vector<double> out(plane * out_dim, 0.0);
    for (std::size_t i = 0; i < plane; ++i) {
      const double* f = p.features.data() + i * feat_dim;
      for (int o = 0; o < out_dim; ++o) {
        const double* row = params.data() + static_cast<std::size_t>(o) * feat_dim;
        double acc = 0.0;
        for (int k = 0; k < feat_dim; ++k) acc += row[k] * f[k];
        if (!std::isfinite(acc)) diverged();
        out[o * plane + i] = acc;
      }
    }
    return Field(out_dim, height, width, std::move(out));
  };

  ToyTrainResult result;
  std::vector<double> grad(params.size());
  for (; step <= cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s) {
      const Prepared& p = data[s];
      if (p.weight_total == 0.0) continue;
      const IdMap& inst = suite[s].instances;
      const Field pred = predict(p, inst.height(), inst.width());
      const LossResult loss = direct ? direct_l1_loss(pred, p.target, p.weights)
                                     : instance_pe_loss(pred, p.target, p.weights);
      const double share = p.weight_total / weight_total;
      total += share * loss.value;
      if (step == cfg.steps) continue;
      const std::size_t plane = pred.plane_size();
      for (std::size_t i = 0; i < plane; ++i) {
        const double* f = p.features.data() + i * feat_dim;
        for (int o = 0; o < out_dim; ++o) {
          const double g = share * loss.gradient[o * plane + i];
          if (g == 0.0) continue;
          double* row = grad.data() + static_cast<std::size_t>(o) * feat_dim;
          for (int k = 0; k < feat_dim; ++k) row[k] += g * f[k];
        }
      }
    }
    if (!std::isfinite(total)) diverged();
    result.loss_history.push_back(total);
    if (step == cfg.steps) break;
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k] -= cfg.learning_rate * grad[k];
      if (!std::isfinite(params[k])) diverged();
    }
  }

  FusionConfig grouping;
  grouping.min_instance_area = 1;
  grouping.merge_radius = 0.0;
  std::vector<double> sums;
  std::vector<std::int64_t> counts;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const IdMap& inst = suite[s].instances;
    const Field pred = predict(data[s], inst.height(), inst.width());
    const CellMap cells = direct ? decode_rgb_direct(pred, grid) : decode_pe(pred, grid);
    const IdMap predicted = cluster_instances(cells, grid, grouping);
    const IoUBySize table = iou_by_size(predicted, inst, cfg.size_thresholds);
    if (sums.empty()) {
      result.table = table;
      sums.assign(table.bins.size(), 0.0);
      counts.assign(table.bins.size(), 0);
    }
    for (std::size_t k = 0; k < table.bins.size(); ++k) {
      counts[k] += table.bins[k].count;
      if (table.bins[k].mean_iou) sums[k] += *table.bins[k].mean_iou * table.bins[k].count;
    }
  }
  for (std::size_t k = 0; k < result.table.bins.size(); ++k) {
    SizeBin& bin = result.table.bins[k];
    bin.count = counts[k];
    bin.mean_iou.reset();
    if (counts[k] > 0) bin.mean_iou = sums[k] / static_cast<double>(counts[k]);
  }
  return result;
}

std::string loss_scale_report_json(const LossScaleReport& report) {
  json series = json::array();
  for (const auto& rec : report.records) {
    series.push_back({{"row", rec.pixel.row},
                      {"col", rec.pixel.col},
                      {"own", rec.own},
                      {"neighbor", rec.neighbor},
                      {"centroid_distance", rec.centroid_distance},
                      {"loss", rec.loss}});
  }
  json doc = {{"records", series},
              {"mean_loss", report.mean_loss},
              {"correlation", report.correlation ? json(*report.correlation) : json(nullptr)},
              {"coefficient_of_variation", report.coefficient_of_variation
                                               ? json(*report.coefficient_of_variation)
                                               : json(nullptr)}};
  return doc.dump(2) + "\n";
}

std::string loss_scale_report_csv(const LossScaleReport& report) {
  std::ostringstream out;
  out << "row,col,own,neighbor,centroid_distance,loss\n";
  for (const auto& rec : report.records) {
    out << rec.pixel.row << ',' << rec.pixel.col << ',' << rec.own << ',' << rec.neighbor
        << ',' << num(rec.centroid_distance) << ',' << num(rec.loss) << '\n';
  }
  return out.str();
}

std::string toy_train_json(const ToyTrainResult& result, const ToyTrainConfig& cfg) {
  json bins = json::parse(iou_by_size_json(result.table))["bins"];
  json doc = {{"encoding", cfg.encoding.is_direct() ? "direct" : "pe"},
              {"harmonics", cfg.encoding.is_direct() ? 0 : cfg.encoding.harmonics},
              {"eds", cfg.use_eds},
              {"steps", cfg.steps},
              {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed},
              {"loss", result.loss_history},
              {"bins", bins}};
  return doc.dump(2) + "\n";
}

}  // namespace ppe
