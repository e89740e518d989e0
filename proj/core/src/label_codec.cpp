// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/label_codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ppe/error.hpp"

namespace ppe {
namespace {

double half_norm(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double half_norm(std::span<const double> a) {
  double sum = 0.0;
  for (double x : a) sum += x * x;
  return std::sqrt(sum);
}

struct Accum {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::int64_t count = 0;
};

Centroid centroid_from_sums(const Accum& acc, int height, int width) {
  const double mean_row = static_cast<double>(acc.rows) / acc.count;
  const double mean_col = static_cast<double>(acc.cols) / acc.count;
  return {normalize_coord(mean_col, width), normalize_coord(mean_row, height)};
}

// Lowest-index argmin of combine(du[col], dv[row]) over the row-major grid,
// where combine is monotone non-decreasing in both arguments. Because
// rounding is monotone, the minimum is attained at (argmin dv, argmin du);
// the scan below then finds the first candidate reaching that exact value,
// which is what an exhaustive scan would return.
template <typename Combine>
std::pair<int, double> separable_argmin(std::span<const double> du,
                                        std::span<const double> dv,
                                        Combine combine) {
  const auto min_u = *std::min_element(du.begin(), du.end());
  const auto min_v = *std::min_element(dv.begin(), dv.end());
  const double best = combine(min_u, min_v);
  const int cols = static_cast<int>(du.size());
  for (int r = 0; r < static_cast<int>(dv.size()); ++r) {
    if (combine(min_u, dv[r]) != best) continue;
    for (int c = 0; c < cols; ++c) {
      if (combine(du[c], dv[r]) == best) return {r * cols + c, best};
    }
  }
  return {-1, best};  // unreachable
}

void check_pixel_dims(int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("map dimensions must be positive");
}

}  // namespace

void PEConfig::validate() const {
  if (harmonics < 1) throw DomainError("harmonics must be >= 1");
  if (grid_h < 2 || grid_w < 2) throw DomainError("grid dims must be >= 2");
}

void gamma_into(double p, int harmonics, std::span<double> out) {
  double freq = std::numbers::pi;
  for (int l = 0; l < harmonics; ++l) {
    out[2 * l] = std::sin(freq * p);
    out[2 * l + 1] = std::cos(freq * p);
    freq *= 2.0;
  }
}

std::vector<double> gamma(double p, int harmonics) {
  std::vector<double> out(2 * static_cast<std::size_t>(harmonics));
  gamma_into(p, harmonics, out);
  return out;
}

Centroid centroid_of(std::span<const Pixel> pixels, int height, int width) {
  if (pixels.empty()) throw DomainError("centroid of an empty pixel set");
  check_pixel_dims(height, width);
  Accum acc;
  for (const Pixel& p : pixels) {
    acc.rows += p.row;
    acc.cols += p.col;
    ++acc.count;
  }
  return centroid_from_sums(acc, height, width);
}

std::map<std::uint32_t, Centroid> instance_centroids(const IdMap& map) {
  std::map<std::uint32_t, Accum> sums;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const std::uint32_t id = map.at(r, c);
      if (id == kVoidId) continue;
      Accum& acc = sums[id];
      acc.rows += r;
      acc.cols += c;
      ++acc.count;
    }
  }
  std::map<std::uint32_t, Centroid> out;
  for (const auto& [id, acc] : sums) {
    out.emplace(id, centroid_from_sums(acc, map.height(), map.width()));
  }
  return out;
}

UVGrid::UVGrid(const PEConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int dim = cfg_.coord_dim();
  u_embed_.resize(static_cast<std::size_t>(cfg_.grid_w) * dim);
  v_embed_.resize(static_cast<std::size_t>(cfg_.grid_h) * dim);
  for (int c = 0; c < cfg_.grid_w; ++c) {
    gamma_into(u_of_col(c), cfg_.harmonics,
               std::span<double>(u_embed_).subspan(c * dim, dim));
  }
  for (int r = 0; r < cfg_.grid_h; ++r) {
    gamma_into(v_of_row(r), cfg_.harmonics,
               std::span<double>(v_embed_).subspan(r * dim, dim));
  }
}

std::span<const double> UVGrid::u_embedding(int col) const {
  const int dim = cfg_.coord_dim();
  return std::span<const double>(u_embed_).subspan(col * dim, dim);
}

std::span<const double> UVGrid::v_embedding(int row) const {
  const int dim = cfg_.coord_dim();
  return std::span<const double>(v_embed_).subspan(row * dim, dim);
}

std::vector<double> UVGrid::encoding(int candidate) const {
  std::vector<double> out(cfg_.pixel_dim(), 0.0);
  if (candidate == void_index()) return out;
  if (candidate < 0 || candidate > void_index()) {
    throw DomainError("candidate index out of range");
  }
  const auto u = u_embedding(candidate % cfg_.grid_w);
  const auto v = v_embedding(candidate / cfg_.grid_w);
  std::copy(u.begin(), u.end(), out.begin());
  std::copy(v.begin(), v.end(), out.begin() + cfg_.coord_dim());
  return out;
}

Centroid UVGrid::centre(int cell) const {
  if (cell < 0 || cell >= cell_count()) throw DomainError("cell index out of range");
  return {u_of_col(cell % cfg_.grid_w), v_of_row(cell / cfg_.grid_w)};
}

int UVGrid::quantize(const Centroid& c) const {
  return coord_bin(c.v, cfg_.grid_h) * cfg_.grid_w + coord_bin(c.u, cfg_.grid_w);
}

CellMap::CellMap(int height, int width, int void_index,
                 std::vector<std::int32_t> cells)
    : height_(height), width_(width), void_index_(void_index), cells_(std::move(cells)) {
  if (cells_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("CellMap: size does not match dimensions");
  }
}

std::vector<std::uint8_t> CellMap::void_flags() const {
  std::vector<std::uint8_t> flags(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) flags[i] = cells_[i] == void_index_;
  return flags;
}

IdMap CellMap::to_id_map() const {
  std::vector<std::uint32_t> ids(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    ids[i] = cells_[i] == void_index_ ? kVoidId
                                      : static_cast<std::uint32_t>(cells_[i]) + 1;
  }
  return IdMap(height_, width_, std::move(ids));
}

double embedding_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() % 2 != 0) {
    throw ShapeError("embedding_distance: mismatched embedding sizes");
  }
  const std::size_t half = a.size() / 2;
  return 0.5 * (half_norm(a.first(half), b.first(half)) +
                half_norm(a.subspan(half), b.subspan(half)));
}

Field encode_pe(const IdMap& map, const PEConfig& cfg) {
  cfg.validate();
  check_pixel_dims(map.height(), map.width());
  const int dim = cfg.pixel_dim();
  std::map<std::uint32_t, std::vector<double>> codes;
  for (const auto& [id, c] : instance_centroids(map)) {
    std::vector<double> code(dim);
    gamma_into(c.u, cfg.harmonics, std::span<double>(code).first(dim / 2));
    gamma_into(c.v, cfg.harmonics, std::span<double>(code).subspan(dim / 2));
    codes.emplace(id, std::move(code));
  }
  const std::size_t plane = map.size();
  std::vector<double> values(plane * dim, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (map[i] == kVoidId) continue;
    const auto& code = codes.at(map[i]);
    for (int k = 0; k < dim; ++k) values[k * plane + i] = code[k];
  }
  return Field(dim, map.height(), map.width(), std::move(values));
}

CellMap decode_pe(const Field& pred, const UVGrid& grid) {
  const int dim = grid.config().pixel_dim();
  if (pred.channels() != dim) {
    throw ShapeError("decode_pe: prediction has " + std::to_string(pred.channels()) +
                     " channels, grid expects " + std::to_string(dim));
  }
  const int half = dim / 2;
  const std::size_t plane = pred.plane_size();
  std::vector<double> px(dim);
  std::vector<double> du(grid.cols());
  std::vector<double> dv(grid.rows());
  std::vector<std::int32_t> cells(plane);
  const auto combine = [](double a, double b) { return 0.5 * (a + b); };
  for (std::size_t i = 0; i < plane; ++i) {
    for (int k = 0; k < dim; ++k) px[k] = pred[k * plane + i];
    const std::span<const double> pu(px.data(), half);
    const std::span<const double> pv(px.data() + half, half);
    for (int c = 0; c < grid.cols(); ++c) du[c] = half_norm(pu, grid.u_embedding(c));
    for (int r = 0; r < grid.rows(); ++r) dv[r] = half_norm(pv, grid.v_embedding(r));
    const auto [cell, best] = separable_argmin(du, dv, combine);
    const double void_dist = combine(half_norm(pu), half_norm(pv));
    cells[i] = void_dist < best ? grid.void_index() : cell;
  }
  return CellMap(pred.height(), pred.width(), grid.void_index(), std::move(cells));
}

Field encode_rgb_direct(const IdMap& map) {
  check_pixel_dims(map.height(), map.width());
  const auto centroids = instance_centroids(map);
  const std::size_t plane = map.size();
  std::vector<double> values(3 * plane, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (map[i] == kVoidId) continue;
    const Centroid& c = centroids.at(map[i]);
    values[i] = 0.5 * (c.u + 1.0);
    values[plane + i] = 0.5 * (c.v + 1.0);
    values[2 * plane + i] = 1.0;
  }
  return Field(3, map.height(), map.width(), std::move(values));
}

CellMap decode_rgb_direct(const Field& pred, const UVGrid& grid) {
  if (pred.channels() != 3) throw ShapeError("decode_rgb_direct: expected 3 channels");
  const std::size_t plane = pred.plane_size();
  std::vector<double> du(grid.cols());
  std::vector<double> dv(grid.rows());
  std::vector<std::int32_t> cells(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = pred[i];
    const double g = pred[plane + i];
    const double b = pred[2 * plane + i];
    for (int c = 0; c < grid.cols(); ++c) du[c] = std::abs(r - 0.5 * (grid.u_of_col(c) + 1.0));
    for (int k = 0; k < grid.rows(); ++k) dv[k] = std::abs(g - 0.5 * (grid.v_of_row(k) + 1.0));
    const double db = std::abs(b - 1.0);
    const auto combine = [db](double a, double bb) { return (a + bb + db) / 3.0; };
    const auto [cell, best] = separable_argmin(du, dv, combine);
    const double void_dist = (std::abs(r) + std::abs(g) + std::abs(b)) / 3.0;
    cells[i] = void_dist < best ? grid.void_index() : cell;
  }
  return CellMap(pred.height(), pred.width(), grid.void_index(), std::move(cells));
}

int coord_bin(double p, int bins) {
  const double scaled = std::floor((p + 1.0) * 0.5 * bins);
  return static_cast<int>(std::clamp(scaled, 0.0, static_cast<double>(bins - 1)));
}

std::pair<IdMap, IdMap> encode_uv_classes(const IdMap& map, int bins) {
  if (bins < 2) throw DomainError("encode_uv_classes: bins must be >= 2");
  check_pixel_dims(map.height(), map.width());
  const auto centroids = instance_centroids(map);
  std::vector<std::uint32_t> ub(map.size(), static_cast<std::uint32_t>(bins));
  std::vector<std::uint32_t> vb(map.size(), static_cast<std::uint32_t>(bins));
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] == kVoidId) continue;
    const Centroid& c = centroids.at(map[i]);
    ub[i] = static_cast<std::uint32_t>(coord_bin(c.u, bins));
    vb[i] = static_cast<std::uint32_t>(coord_bin(c.v, bins));
  }
  return {IdMap(map.height(), map.width(), std::move(ub)),
          IdMap(map.height(), map.width(), std::move(vb))};
}

double contrast_ratio(int points, const Encoding& encoding) {
  if (points < 2) throw DomainError("contrast_ratio: need at least 2 points");
  // Candidates sit at equal spacing, so every pairwise distance is a
  // function of the index offset k alone.
  const auto distance = [&](int k) {
    if (encoding.is_direct()) return static_cast<double>(k);
    const double delta = 2.0 * k / points;
    double sum = 0.0;
    double freq = std::numbers::pi;
    for (int l = 0; l < encoding.harmonics; ++l) {
      sum += 2.0 - 2.0 * std::cos(freq * delta);
      freq *= 2.0;
    }
    return std::sqrt(sum);
  };
  if (!encoding.is_direct() && encoding.harmonics < 1) {
    throw DomainError("contrast_ratio: harmonics must be >= 1");
  }
  double longest = 0.0;
  double shortest = std::numeric_limits<double>::infinity();
  for (int k = 1; k < points; ++k) {
    const double d = distance(k);
    longest = std::max(longest, d);
    shortest = std::min(shortest, d);
  }
  return longest / shortest;
}

}  // namespace ppe
