// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "ppe/grid.hpp"

namespace ppe {

/// Edge-distance sampling parameters: w = w_min + (1 - w_min) exp(-d^2 / D^2).
struct EDSConfig {
  double w_min = 0.0;
  double falloff = 20.0;  // D, in pixels

  void validate() const;
};

/// H x W flags; 1 marks a boundary pixel.
class BoundaryMask {
 public:
  BoundaryMask() = default;
  BoundaryMask(int height, int width, std::vector<std::uint8_t> flags);

  int height() const { return height_; }
  int width() const { return width_; }
  bool at(int row, int col) const {
    return flags_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  const std::vector<std::uint8_t>& flags() const { return flags_; }
  std::size_t count() const;
  bool any() const { return count() > 0; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> flags_;
};

/// A pixel is on the boundary iff one of its in-image 4-neighbours carries
/// a different id. Instance/void transitions count.
BoundaryMask boundary_mask(const IdMap& map);

/// Stand-in for an infinite distance when no boundary exists; strictly
/// larger than the image diagonal.
double no_boundary_distance(int height, int width);

/// Exact squared Euclidean distance (pixel centre to nearest boundary
/// pixel centre), computed with a separable two-pass lower-envelope scan.
/// Entries are -1 when the mask is empty.
std::vector<std::int64_t> squared_distance_transform(const BoundaryMask& boundary);

/// sqrt of squared_distance_transform as a 1 x H x W field; no_boundary_distance
/// everywhere when the mask is empty.
Field distance_transform(const BoundaryMask& boundary);

/// Edge-distance weight of a single distance.
double eds_weight(double distance, const EDSConfig& cfg);

/// Weights from a distance field; pixels at no_boundary_distance get w_min.
WeightMask eds_weights_from_distance(const Field& distance, const EDSConfig& cfg);

WeightMask eds_weights(const IdMap& map, const EDSConfig& cfg);

}  // namespace ppe
