// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/eds.hpp"

#include <algorithm>
#include <cmath>

#include "ppe/error.hpp"

namespace ppe {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void EDSConfig::validate() const {
  if (!(w_min >= 0.0 && w_min <= 1.0)) throw DomainError("w_min must lie in [0, 1]");
  if (!(falloff > 0.0) || !std::isfinite(falloff)) {
    throw DomainError("EDS falloff D must be positive");
  }
}

BoundaryMask::BoundaryMask(int height, int width, std::vector<std::uint8_t> flags)
    : height_(height), width_(width), flags_(std::move(flags)) {
  if (height < 0 || width < 0 ||
      flags_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("BoundaryMask: size does not match dimensions");
  }
}

std::size_t BoundaryMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(flags_.begin(), flags_.end(), [](std::uint8_t f) { return f != 0; }));
}

BoundaryMask boundary_mask(const IdMap& map) {
  const int h = map.height();
  const int w = map.width();
  std::vector<std::uint8_t> flags(map.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::uint32_t id = map.at(r, c);
      const bool edge = (r > 0 && map.at(r - 1, c) != id) ||
                        (r + 1 < h && map.at(r + 1, c) != id) ||
                        (c > 0 && map.at(r, c - 1) != id) ||
                        (c + 1 < w && map.at(r, c + 1) != id);
      flags[static_cast<std::size_t>(r) * w + c] = edge ? 1 : 0;
    }
  }
  return BoundaryMask(h, w, std::move(flags));
}

double no_boundary_distance(int height, int width) {
  return 2.0 * (static_cast<double>(height) + width) + 1.0;
}

// Meijster, Roerdink and Hesselink's exact EDT: a per-column 1-D scan,
// then a per-row lower envelope of parabolas with integer separators.
std::vector<std::int64_t> squared_distance_transform(const BoundaryMask& boundary) {
  const int h = boundary.height();
  const int w = boundary.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (!boundary.any()) return std::vector<std::int64_t>(n, -1);

  const std::int64_t inf = static_cast<std::int64_t>(h) + w;
  std::vector<std::int64_t> g(n);
  for (int c = 0; c < w; ++c) {
    g[c] = boundary.at(0, c) ? 0 : inf;
    for (int r = 1; r < h; ++r) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      g[i] = boundary.at(r, c) ? 0 : 1 + g[i - w];
    }
    for (int r = h - 2; r >= 0; --r) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (g[i + w] < g[i]) g[i] = 1 + g[i + w];
    }
  }

  std::vector<std::int64_t> out(n);
  std::vector<int> s(w);
  std::vector<int> t(w);
  for (int r = 0; r < h; ++r) {
    const std::int64_t* row = g.data() + static_cast<std::size_t>(r) * w;
    const auto f = [row](std::int64_t x, int i) {
      return (x - i) * (x - i) + row[i] * row[i];
    };
    const auto sep = [row](int i, int u) {
      return floor_div(static_cast<std::int64_t>(u) * u - static_cast<std::int64_t>(i) * i +
                           row[u] * row[u] - row[i] * row[i],
                       2 * static_cast<std::int64_t>(u - i));
    };
    int q = 0;
    s[0] = 0;
    t[0] = 0;
    for (int u = 1; u < w; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t sp = 1 + sep(s[q], u);
        if (sp < w) {
          ++q;
          s[q] = u;
          t[q] = static_cast<int>(sp);
        }
      }
    }
    std::int64_t* dst = out.data() + static_cast<std::size_t>(r) * w;
    for (int u = w - 1; u >= 0; --u) {
      dst[u] = f(u, s[q]);
      if (u == t[q]) --q;
    }
  }
  return out;
}

Field distance_transform(const BoundaryMask& boundary) {
  const auto sq = squared_distance_transform(boundary);
  std::vector<double> values(sq.size());
  const double none = no_boundary_distance(boundary.height(), boundary.width());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    values[i] = sq[i] < 0 ? none : std::sqrt(static_cast<double>(sq[i]));
  }
  return Field(1, boundary.height(), boundary.width(), std::move(values));
}

double eds_weight(double distance, const EDSConfig& cfg) {
  const double ratio = distance / cfg.falloff;
  return cfg.w_min + (1.0 - cfg.w_min) * std::exp(-ratio * ratio);
}

WeightMask eds_weights_from_distance(const Field& distance, const EDSConfig& cfg) {
  cfg.validate();
  if (distance.channels() != 1) throw ShapeError("distance field must have one channel");
  const double none = no_boundary_distance(distance.height(), distance.width());
  std::vector<double> weights(distance.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double d = distance[i];
    weights[i] = d >= none ? cfg.w_min : std::clamp(eds_weight(d, cfg), 0.0, 1.0);
  }
  return WeightMask(distance.height(), distance.width(), std::move(weights));
}

WeightMask eds_weights(const IdMap& map, const EDSConfig& cfg) {
  return eds_weights_from_distance(distance_transform(boundary_mask(map)), cfg);
}

}  // namespace ppe
