// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/grid.hpp"

#include <cmath>
#include <string>

#include "ppe/error.hpp"

namespace ppe {
namespace {

void check_dims(int height, int width) {
  if (height < 0 || width < 0) {
    throw ShapeError("negative grid dimensions");
  }
}

}  // namespace

IdMap::IdMap(int height, int width, std::vector<std::uint32_t> ids)
    : height_(height), width_(width), ids_(std::move(ids)) {
  check_dims(height, width);
  if (ids_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("IdMap: expected " + std::to_string(height * width) +
                     " ids, got " + std::to_string(ids_.size()));
  }
}

IdMap IdMap::filled(int height, int width, std::uint32_t id) {
  check_dims(height, width);
  return IdMap(height, width,
               std::vector<std::uint32_t>(
                   static_cast<std::size_t>(height) * width, id));
}

Field::Field(int channels, int height, int width, std::vector<double> values)
    : channels_(channels),
      height_(height),
      width_(width),
      values_(std::move(values)) {
  check_dims(height, width);
  if (channels < 0) throw ShapeError("negative channel count");
  const std::size_t expected =
      static_cast<std::size_t>(channels) * height * width;
  if (values_.size() != expected) {
    throw ShapeError("Field: expected " + std::to_string(expected) +
                     " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("Field: non-finite value");
  }
}

Field Field::zeros(int channels, int height, int width) {
  check_dims(height, width);
  return Field(channels, height, width,
               std::vector<double>(
                   static_cast<std::size_t>(channels) * height * width, 0.0));
}

WeightMask::WeightMask(int height, int width, std::vector<double> weights)
    : height_(height), width_(width), weights_(std::move(weights)) {
  check_dims(height, width);
  if (weights_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("WeightMask: size does not match dimensions");
  }
  for (double w : weights_) {
    // Negated comparison also rejects NaN.
    if (!(w >= 0.0 && w <= 1.0)) {
      throw DomainError("WeightMask: weight outside [0, 1]");
    }
  }
}

WeightMask WeightMask::uniform(int height, int width, double weight) {
  check_dims(height, width);
  return WeightMask(
      height, width,
      std::vector<double>(static_cast<std::size_t>(height) * width, weight));
}

}  // namespace ppe
