// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ppe/grid.hpp"

namespace ppe {

/// Instance centroid in normalised image coordinates, both in [-1, 1].
/// u runs along columns, v along rows.
struct Centroid {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const Centroid&, const Centroid&) = default;
};

/// Positional-embedding codec settings. Each coordinate embeds into 2L
/// values, a pixel target into 4L.
struct PEConfig {
  int harmonics = 4;
  int grid_h = 80;
  int grid_w = 80;

  int coord_dim() const { return 2 * harmonics; }
  int pixel_dim() const { return 4 * harmonics; }
  /// Throws DomainError unless harmonics >= 1 and both grid dims >= 2.
  void validate() const;

  static PEConfig coco() { return {4, 80, 80}; }
  static PEConfig cityscapes() { return {4, 160, 320}; }
};

/// Sinusoidal embedding (sin(2^l pi p), cos(2^l pi p)) for l = 0..L-1,
/// interleaved as sin, cos pairs.
std::vector<double> gamma(double p, int harmonics);

/// Writes gamma(p) into out (size 2L) without allocating.
void gamma_into(double p, int harmonics, std::span<double> out);

/// Pixel-centre normalisation onto [-1, 1].
inline double normalize_coord(double index, int extent) {
  return 2.0 * (index + 0.5) / extent - 1.0;
}

/// Centre of mass of the pixel centres. Throws DomainError when empty.
Centroid centroid_of(std::span<const Pixel> pixels, int height, int width);

/// Centroid of every non-void id in the map, keyed by id.
std::map<std::uint32_t, Centroid> instance_centroids(const IdMap& map);

/// Discretised set of candidate centroids placed at the cell centres of a
/// uniform grid_h x grid_w grid over [-1, 1]^2, plus one void candidate
/// with the all-zero encoding. Candidate index is row * grid_w + col; the
/// void candidate comes last.
class UVGrid {
 public:
  explicit UVGrid(const PEConfig& cfg);

  const PEConfig& config() const { return cfg_; }
  int harmonics() const { return cfg_.harmonics; }
  int rows() const { return cfg_.grid_h; }
  int cols() const { return cfg_.grid_w; }
  int cell_count() const { return cfg_.grid_h * cfg_.grid_w; }
  int void_index() const { return cell_count(); }
  int candidate_count() const { return cell_count() + 1; }

  double u_of_col(int col) const { return normalize_coord(col, cfg_.grid_w); }
  double v_of_row(int row) const { return normalize_coord(row, cfg_.grid_h); }

  /// gamma(u) of a grid column / gamma(v) of a grid row, each 2L values.
  std::span<const double> u_embedding(int col) const;
  std::span<const double> v_embedding(int row) const;

  /// Full 4L encoding of a candidate; the void candidate is all zeros.
  std::vector<double> encoding(int candidate) const;
  Centroid centre(int cell) const;

  /// Cell whose centre is nearest in coordinate space (uniform binning).
  int quantize(const Centroid& c) const;

 private:
  PEConfig cfg_;
  std::vector<double> u_embed_;  // grid_w x 2L
  std::vector<double> v_embed_;  // grid_h x 2L
};

/// Per-pixel decoded candidate index. Void pixels hold void_index.
class CellMap {
 public:
  CellMap() = default;
  CellMap(int height, int width, int void_index, std::vector<std::int32_t> cells);

  int height() const { return height_; }
  int width() const { return width_; }
  int void_index() const { return void_index_; }
  std::int32_t at(int row, int col) const {
    return cells_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<const std::int32_t> cells() const { return cells_; }
  bool is_void(int row, int col) const { return at(row, col) == void_index_; }
  std::vector<std::uint8_t> void_flags() const;

  /// Cell index + 1 per pixel with 0 for void, usable as an IdMap.
  IdMap to_id_map() const;

  friend bool operator==(const CellMap&, const CellMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int void_index_ = 0;
  std::vector<std::int32_t> cells_;
};

/// Mean of the u-half and v-half Euclidean distances of two 4L vectors.
double embedding_distance(std::span<const double> a, std::span<const double> b);

/// Labeled pixels get concat(gamma(u), gamma(v)) of their instance centroid,
/// void pixels the zero vector. Output has 4L channels.
Field encode_pe(const IdMap& map, const PEConfig& cfg);

/// Nearest candidate (including void) per pixel under embedding_distance,
/// ties to the lowest candidate index. Throws ShapeError on channel mismatch.
CellMap decode_pe(const Field& pred, const UVGrid& grid);

/// Three channels: centroid u and v mapped to [0, 1], and 1 on labeled
/// pixels. Void pixels are (0, 0, 0).
Field encode_rgb_direct(const IdMap& map);

/// Nearest candidate of a direct RGB prediction under mean absolute error,
/// candidates being (u01, v01, 1) per cell plus the black void candidate.
CellMap decode_rgb_direct(const Field& pred, const UVGrid& grid);

/// Uniform bin of a normalised coordinate, clamped to [0, bins - 1].
int coord_bin(double p, int bins);

/// Independent u / v class targets. Void pixels carry the extra index `bins`.
std::pair<IdMap, IdMap> encode_uv_classes(const IdMap& map, int bins);

/// How candidates are encoded for the contrast and loss-scale analyses.
struct Encoding {
  enum class Kind { kDirect, kPositional };
  Kind kind = Kind::kPositional;
  int harmonics = 4;

  static Encoding direct() { return {Kind::kDirect, 0}; }
  static Encoding positional(int harmonics) {
    return {Kind::kPositional, harmonics};
  }
  bool is_direct() const { return kind == Kind::kDirect; }
};

/// Over `points` 1-D cell-centre coordinates in [-1, 1]: largest pairwise
/// encoding distance divided by the smallest pairwise encoding distance.
double contrast_ratio(int points, const Encoding& encoding);

}  // namespace ppe
