// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ppe {

/// Id reserved for unlabeled pixels in every IdMap.
inline constexpr std::uint32_t kVoidId = 0;

/// Row/column position inside an image grid.
struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// H x W grid of integer labels stored row-major. Id 0 is void.
class IdMap {
 public:
  IdMap() = default;
  IdMap(int height, int width, std::vector<std::uint32_t> ids);

  static IdMap filled(int height, int width, std::uint32_t id = kVoidId);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  std::uint32_t at(int row, int col) const {
    return ids_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::uint32_t operator[](std::size_t index) const { return ids_[index]; }
  std::span<const std::uint32_t> ids() const { return ids_; }

  friend bool operator==(const IdMap&, const IdMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint32_t> ids_;
};

/// C x H x W grid of finite reals, channel-major then row-major.
class Field {
 public:
  Field() = default;
  /// Throws DomainError on non-finite values, ShapeError on a size mismatch.
  Field(int channels, int height, int width, std::vector<double> values);

  static Field zeros(int channels, int height, int width);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  std::size_t index(int channel, int row, int col) const {
    return (static_cast<std::size_t>(channel) * height_ + row) * width_ + col;
  }
  double at(int channel, int row, int col) const {
    return values_[index(channel, row, col)];
  }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const Field& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// H x W per-pixel loss weights, each in [0, 1].
class WeightMask {
 public:
  WeightMask() = default;
  WeightMask(int height, int width, std::vector<double> weights);

  static WeightMask uniform(int height, int width, double weight = 1.0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return weights_.size(); }
  double at(int row, int col) const {
    return weights_[static_cast<std::size_t>(row) * width_ + col];
  }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }

  friend bool operator==(const WeightMask&, const WeightMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> weights_;
};

}  // namespace ppe
