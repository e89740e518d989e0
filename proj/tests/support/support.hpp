// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-rolled generators and oracles shared by the unit and acceptance
// tests. Nothing here calls into the code under test except to build
// inputs, so the oracles stay independent of the implementations.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "ppe/eds.hpp"
#include "ppe/grid.hpp"
#include "ppe/lab.hpp"
#include "ppe/label_codec.hpp"
#include "ppe/panoptic.hpp"
#include "ppe/rng.hpp"

namespace ppe::testing {

inline IdMap random_id_map(Rng& rng, int height, int width, std::uint32_t max_id) {
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(height) * width);
  for (auto& id : ids) id = static_cast<std::uint32_t>(rng.next() % (max_id + 1ULL));
  return IdMap(height, width, std::move(ids));
}

/// Piecewise-constant map: a few random rectangles painted over void, so
/// maps have both large regions and boundaries.
inline IdMap random_blocky_map(Rng& rng, int height, int width, int rects,
                               std::uint32_t max_id) {
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(height) * width, kVoidId);
  for (int k = 0; k < rects; ++k) {
    const int r0 = rng.uniform_int(0, height - 1);
    const int c0 = rng.uniform_int(0, width - 1);
    const int r1 = rng.uniform_int(r0, height - 1);
    const int c1 = rng.uniform_int(c0, width - 1);
    const auto id = static_cast<std::uint32_t>(rng.uniform_int(0, static_cast<int>(max_id)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) ids[static_cast<std::size_t>(r) * width + c] = id;
    }
  }
  return IdMap(height, width, std::move(ids));
}

inline Field random_field(Rng& rng, int channels, int height, int width, double lo = -1.0,
                          double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(channels) * height * width);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Field(channels, height, width, std::move(v));
}

inline Field with_value(const Field& f, std::size_t index, double value) {
  std::vector<double> v(f.values().begin(), f.values().end());
  v[index] = value;
  return Field(f.channels(), f.height(), f.width(), std::move(v));
}

/// Central-difference gradient of `loss` at `at`.
inline std::vector<double> numeric_gradient(const std::function<double(const Field&)>& loss,
                                            const Field& at, double step = 1e-5) {
  std::vector<double> g(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double plus = loss(with_value(at, i, at[i] + step));
    const double minus = loss(with_value(at, i, at[i] - step));
    g[i] = (plus - minus) / (2.0 * step);
  }
  return g;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) with central
/// differences of the given step. Returns 0 when both vanish.
inline double gradient_relative_error(const std::function<double(const Field&)>& loss,
                                      const Field& at, const Field& analytic,
                                      double step = 1e-5) {
  const std::vector<double> numeric = numeric_gradient(loss, at, step);
  double diff2 = 0.0;
  for (std::size_t i = 0; i < at.size(); ++i) {
    diff2 += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
  }
  const double scale = std::max(norm2(analytic.values()), norm2(numeric));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff2) / scale;
}

/// Embedding of a centroid, computed directly from the trigonometric
/// definition.
inline std::vector<double> reference_code(double u, double v, int harmonics) {
  std::vector<double> code;
  for (double p : {u, v}) {
    for (int l = 0; l < harmonics; ++l) {
      const double a = std::ldexp(1.0, l) * M_PI * p;
      code.push_back(std::sin(a));
      code.push_back(std::cos(a));
    }
  }
  return code;
}

inline double reference_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t half = a.size() / 2;
  double su = 0.0;
  double sv = 0.0;
  for (std::size_t k = 0; k < half; ++k) su += (a[k] - b[k]) * (a[k] - b[k]);
  for (std::size_t k = half; k < a.size(); ++k) sv += (a[k] - b[k]) * (a[k] - b[k]);
  return 0.5 * (std::sqrt(su) + std::sqrt(sv));
}

/// Candidate with the smallest distance, lowest index on ties; the void
/// candidate (zero vector) is index rows * cols.
inline int brute_force_nearest(std::span<const double> pred, int rows, int cols,
                               int harmonics) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto code = reference_code(2.0 * (c + 0.5) / cols - 1.0,
                                       2.0 * (r + 0.5) / rows - 1.0, harmonics);
      const double d = reference_distance(pred, code);
      if (d < best_d) {
        best_d = d;
        best = r * cols + c;
      }
    }
  }
  const std::vector<double> zero(pred.size(), 0.0);
  if (reference_distance(pred, zero) < best_d) best = rows * cols;
  return best;
}

/// Largest over smallest distance between all pairs of 1-D codes.
inline double pairwise_contrast(int n, const Encoding& e) {
  std::vector<std::vector<double>> codes;
  for (int k = 0; k < n; ++k) {
    const double p = 2.0 * (k + 0.5) / n - 1.0;
    if (e.is_direct()) {
      codes.push_back({p});
    } else {
      const auto full = reference_code(p, 0.0, e.harmonics);
      codes.emplace_back(full.begin(), full.begin() + 2 * e.harmonics);
    }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < codes[i].size(); ++k) {
        s += (codes[i][k] - codes[j][k]) * (codes[i][k] - codes[j][k]);
      }
      lo = std::min(lo, std::sqrt(s));
      hi = std::max(hi, std::sqrt(s));
    }
  }
  return hi / lo;
}

/// Squared distance to the nearest boundary pixel by exhaustive search;
/// -1 where the mask is empty.
inline std::vector<std::int64_t> brute_force_sq_edt(const BoundaryMask& b) {
  const int h = b.height();
  const int w = b.width();
  std::vector<std::int64_t> out(static_cast<std::size_t>(h) * w, -1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::int64_t best = -1;
      for (int rr = 0; rr < h; ++rr) {
        for (int cc = 0; cc < w; ++cc) {
          if (!b.at(rr, cc)) continue;
          const std::int64_t d = std::int64_t{rr - r} * (rr - r) + std::int64_t{cc - c} * (cc - c);
          if (best < 0 || d < best) best = d;
        }
      }
      out[static_cast<std::size_t>(r) * w + c] = best;
    }
  }
  return out;
}

/// Synthetic panoptic truth whose thing instances decode to distinct
/// cells more than `merge_radius` cells apart.
struct RoundTripScene {
  Scene scene;
  IdMap thing_instances;  // stuff and void pixels set to 0
  CategoryTable categories;
};

/// Classes 1 and 2 are things, 3 and 4 stuff.
inline CategoryTable round_trip_categories() {
  return CategoryTable({{1, "thing_a", true},
                        {2, "thing_b", true},
                        {3, "stuff_a", false},
                        {4, "stuff_b", false}});
}

inline bool decodes_apart(const IdMap& things, const UVGrid& grid, double merge_radius) {
  std::vector<int> cells;
  for (const auto& [id, c] : instance_centroids(things)) {
    const auto code = reference_code(c.u, c.v, grid.harmonics());
    cells.push_back(brute_force_nearest(code, grid.rows(), grid.cols(), grid.harmonics()));
  }
  for (std::size_t a = 0; a < cells.size(); ++a) {
    if (cells[a] == grid.void_index()) return false;
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      const double dr = cells[a] / grid.cols() - cells[b] / grid.cols();
      const double dc = cells[a] % grid.cols() - cells[b] % grid.cols();
      if (std::sqrt(dr * dr + dc * dc) <= merge_radius) return false;
    }
  }
  return true;
}

inline RoundTripScene round_trip_scene(std::uint64_t seed, const UVGrid& grid,
                                       double merge_radius, int size = 48) {
  RandomSceneOptions options;
  options.height = size;
  options.width = size;
  options.max_tiles = 10;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const Scene scene = generate_scene(random_scene_spec(options, hash_words(seed, attempt)));
    std::vector<std::uint32_t> things(scene.instances.size(), kVoidId);
    for (std::size_t i = 0; i < things.size(); ++i) {
      const std::uint32_t cls = scene.semantics[i];
      if (cls == 1 || cls == 2) things[i] = scene.instances[i];
    }
    IdMap thing_map(scene.instances.height(), scene.instances.width(), std::move(things));
    if (instance_centroids(thing_map).empty()) continue;
    if (!decodes_apart(thing_map, grid, merge_radius)) continue;
    return {scene, std::move(thing_map), round_trip_categories()};
  }
}

/// Renames ids by a bijection keyed on the seed; void stays void.
inline IdMap permute_ids(const IdMap& map, std::uint64_t seed) {
  std::set<std::uint32_t> present(map.ids().begin(), map.ids().end());
  present.erase(kVoidId);
  std::vector<std::uint32_t> targets;
  for (std::uint32_t id = 1; targets.size() < present.size(); ++id) targets.push_back(id * 7 + 3);
  Rng rng(seed);
  for (std::size_t k = targets.size(); k > 1; --k) {
    std::swap(targets[k - 1], targets[rng.next() % k]);
  }
  std::map<std::uint32_t, std::uint32_t> rename;
  std::size_t k = 0;
  for (std::uint32_t id : present) rename[id] = targets[k++];
  std::vector<std::uint32_t> out(map.ids().begin(), map.ids().end());
  for (auto& id : out) {
    if (id != kVoidId) id = rename[id];
  }
  return IdMap(map.height(), map.width(), std::move(out));
}

}  // namespace ppe::testing
