// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ppe/error.hpp"

namespace ppe {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_plane(const Field& f, const WeightMask& w, const char* what) {
  if (f.height() != w.height() || f.width() != w.width()) {
    throw ShapeError(std::string(what) + ": weights do not match prediction size");
  }
}

double weight_sum(const WeightMask& weights) {
  double total = 0.0;
  for (double w : weights.weights()) total += w;
  if (!(total > 0.0)) throw DomainError("weighted average with all-zero weights");
  return total;
}

// Computes the softmax and log-softmax of the channel vector at one pixel.
void softmax_at(const Field& logits, std::size_t pixel, std::vector<double>& prob,
                std::vector<double>& log_prob) {
  const int n = logits.channels();
  const std::size_t plane = logits.plane_size();
  double peak = logits[pixel];
  for (int k = 1; k < n; ++k) peak = std::max(peak, logits[k * plane + pixel]);
  double z = 0.0;
  for (int k = 0; k < n; ++k) z += std::exp(logits[k * plane + pixel] - peak);
  const double log_z = std::log(z) + peak;
  for (int k = 0; k < n; ++k) {
    log_prob[k] = logits[k * plane + pixel] - log_z;
    prob[k] = std::exp(log_prob[k]);
  }
}

// Gradient of the two-half Euclidean norm 0.5 (|a| + |b|), scaled.
void add_half_norm_gradient(std::span<const double> delta, double scale,
                            std::span<double> grad) {
  const std::size_t half = delta.size() / 2;
  for (std::size_t part = 0; part < 2; ++part) {
    const auto d = delta.subspan(part * half, half);
    double sq = 0.0;
    for (double x : d) sq += x * x;
    if (sq == 0.0) continue;
    const double inv = 0.5 * scale / std::sqrt(sq);
    for (std::size_t k = 0; k < half; ++k) grad[part * half + k] += inv * d[k];
  }
}

double half_norms(std::span<const double> delta) {
  const std::size_t half = delta.size() / 2;
  double a = 0.0;
  double b = 0.0;
  for (std::size_t k = 0; k < half; ++k) a += delta[k] * delta[k];
  for (std::size_t k = half; k < delta.size(); ++k) b += delta[k] * delta[k];
  return 0.5 * (std::sqrt(a) + std::sqrt(b));
}

struct ValidSet {
  std::vector<std::size_t> pixels;
};

ValidSet valid_pixels(const WeightMask& valid) {
  ValidSet set;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i] > 0.0) set.pixels.push_back(i);
  }
  return set;
}

struct RobustStats {
  double median = 0.0;
  double scale = 0.0;
  std::size_t median_slot = 0;  // position in the valid list
  bool median_tied = false;
};

// Lower-middle median and mean absolute deviation around it.
RobustStats robust_stats(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  RobustStats stats;
  stats.median_slot = order[(values.size() - 1) / 2];
  stats.median = values[stats.median_slot];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != stats.median_slot && values[i] == stats.median) stats.median_tied = true;
  }
  double sum = 0.0;
  for (double v : values) sum += std::abs(v - stats.median);
  stats.scale = sum / static_cast<double>(values.size());
  return stats;
}

}  // namespace

double weighted_reduce(const Field& per_pixel, const WeightMask& weights) {
  if (per_pixel.channels() != 1) throw ShapeError("weighted_reduce: expected one channel");
  check_plane(per_pixel, weights, "weighted_reduce");
  const double total = weight_sum(weights);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * per_pixel[i];
  return acc / total;
}

LossResult instance_pe_loss(const Field& pred, const Field& target,
                            const WeightMask& weights) {
  if (!pred.same_shape(target)) throw ShapeError("instance_pe_loss: shape mismatch");
  if (pred.channels() == 0 || pred.channels() % 4 != 0) {
    throw ShapeError("instance_pe_loss: channel count must be a positive multiple of 4");
  }
  check_plane(pred, weights, "instance_pe_loss");
  const double total = weight_sum(weights);
  const int dim = pred.channels();
  const std::size_t plane = pred.plane_size();
  std::vector<double> grad(pred.size(), 0.0);
  std::vector<double> delta(dim);
  std::vector<double> g(dim);
  double acc = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double w = weights[i];
    for (int k = 0; k < dim; ++k) delta[k] = pred[k * plane + i] - target[k * plane + i];
    acc += w * half_norms(delta);
    if (w == 0.0) continue;
    std::fill(g.begin(), g.end(), 0.0);
    add_half_norm_gradient(delta, w / total, g);
    for (int k = 0; k < dim; ++k) grad[k * plane + i] = g[k];
  }
  return {acc / total, Field(dim, pred.height(), pred.width(), std::move(grad))};
}

LossResult direct_l1_loss(const Field& pred, const Field& target,
                          const WeightMask& weights) {
  if (!pred.same_shape(target)) throw ShapeError("direct_l1_loss: shape mismatch");
  if (pred.channels() == 0) throw ShapeError("direct_l1_loss: no channels");
  check_plane(pred, weights, "direct_l1_loss");
  const double total = weight_sum(weights);
  const int dim = pred.channels();
  const std::size_t plane = pred.plane_size();
  std::vector<double> grad(pred.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double w = weights[i];
    double l = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double d = pred[k * plane + i] - target[k * plane + i];
      l += std::abs(d);
      grad[k * plane + i] = sign(d) * w / (dim * total);
    }
    acc += w * l / dim;
  }
  return {acc / total, Field(dim, pred.height(), pred.width(), std::move(grad))};
}

LossResult semantic_ce_loss(const Field& logits, const IdMap& target,
                            const WeightMask& weights,
                            std::optional<std::uint32_t> ignore) {
  if (logits.height() != target.height() || logits.width() != target.width()) {
    throw ShapeError("semantic_ce_loss: target does not match logits size");
  }
  check_plane(logits, weights, "semantic_ce_loss");
  const int n = logits.channels();
  if (n < 1) throw ShapeError("semantic_ce_loss: no classes");
  const std::size_t plane = logits.plane_size();
  std::vector<double> effective(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const std::uint32_t cls = target[i];
    if (ignore && cls == *ignore) {
      effective[i] = 0.0;
      continue;
    }
    if (cls >= static_cast<std::uint32_t>(n)) {
      throw RangeError("semantic_ce_loss: class index " + std::to_string(cls) +
                       " out of range for " + std::to_string(n) + " classes");
    }
    effective[i] = weights[i];
  }
  double total = 0.0;
  for (double w : effective) total += w;
  if (!(total > 0.0)) throw DomainError("semantic_ce_loss: no pixel carries weight");

  std::vector<double> grad(logits.size(), 0.0);
  std::vector<double> prob(n);
  std::vector<double> log_prob(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    const double w = effective[i];
    if (w == 0.0) continue;
    softmax_at(logits, i, prob, log_prob);
    const std::uint32_t cls = target[i];
    acc += -w * log_prob[cls];
    for (int k = 0; k < n; ++k) {
      const double onehot = static_cast<std::uint32_t>(k) == cls ? 1.0 : 0.0;
      grad[k * plane + i] = (prob[k] - onehot) * w / total;
    }
  }
  return {acc / total, Field(n, logits.height(), logits.width(), std::move(grad))};
}

LossResult tv_loss_regression(const Field& pred, TvNorm norm) {
  const int h = pred.height();
  const int w = pred.width();
  const int dim = pred.channels();
  if (dim < 1) throw ShapeError("tv_loss_regression: no channels");
  if (norm == TvNorm::kPositional && dim % 2 != 0) {
    throw ShapeError("tv_loss_regression: positional norm needs an even channel count");
  }
  const std::size_t pairs = static_cast<std::size_t>(h - 1 > 0 ? h - 1 : 0) * w +
                            static_cast<std::size_t>(w - 1 > 0 ? w - 1 : 0) * h;
  if (pairs == 0) throw DomainError("tv_loss_regression: no neighbour pairs");
  const std::size_t plane = pred.plane_size();
  std::vector<double> grad(pred.size(), 0.0);
  std::vector<double> delta(dim);
  std::vector<double> g(dim);
  const double scale = 1.0 / static_cast<double>(pairs);
  double acc = 0.0;

  const auto visit = [&](std::size_t a, std::size_t b) {
    for (int k = 0; k < dim; ++k) delta[k] = pred[k * plane + a] - pred[k * plane + b];
    std::fill(g.begin(), g.end(), 0.0);
    switch (norm) {
      case TvNorm::kL1:
        for (int k = 0; k < dim; ++k) {
          acc += std::abs(delta[k]);
          g[k] = sign(delta[k]) * scale;
        }
        break;
      case TvNorm::kL2: {
        double sq = 0.0;
        for (double d : delta) sq += d * d;
        const double len = std::sqrt(sq);
        acc += len;
        if (len > 0.0) {
          for (int k = 0; k < dim; ++k) g[k] = delta[k] / len * scale;
        }
        break;
      }
      case TvNorm::kPositional:
        acc += half_norms(delta);
        add_half_norm_gradient(delta, scale, g);
        break;
    }
    for (int k = 0; k < dim; ++k) {
      grad[k * plane + a] += g[k];
      grad[k * plane + b] -= g[k];
    }
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (r > 0) visit(i, i - w);
      if (c > 0) visit(i, i - 1);
    }
  }
  return {acc * scale, Field(dim, h, w, std::move(grad))};
}

LossResult tv_loss_ce(const Field& logits) {
  const int h = logits.height();
  const int w = logits.width();
  const int n = logits.channels();
  if (h < 2 || w < 2) throw DomainError("tv_loss_ce: requires H, W >= 2");
  if (n < 1) throw ShapeError("tv_loss_ce: no classes");
  const std::size_t plane = logits.plane_size();
  std::vector<double> prob(logits.size());
  std::vector<double> log_prob(logits.size());
  {
    std::vector<double> p(n);
    std::vector<double> lp(n);
    for (std::size_t i = 0; i < plane; ++i) {
      softmax_at(logits, i, p, lp);
      for (int k = 0; k < n; ++k) {
        prob[k * plane + i] = p[k];
        log_prob[k * plane + i] = lp[k];
      }
    }
  }
  std::vector<double> grad(logits.size(), 0.0);
  double acc = 0.0;
  // 0.5 * H(P_a, P_b); d/dx_a = 0.5 a (-log b - H), d/dx_b = 0.5 (b - a).
  const auto cross = [&](std::size_t a, std::size_t b) {
    double ent = 0.0;
    for (int k = 0; k < n; ++k) ent -= prob[k * plane + a] * log_prob[k * plane + b];
    acc += 0.5 * ent;
    for (int k = 0; k < n; ++k) {
      const double pa = prob[k * plane + a];
      const double pb = prob[k * plane + b];
      grad[k * plane + a] += 0.5 * pa * (-log_prob[k * plane + b] - ent);
      grad[k * plane + b] += 0.5 * (pb - pa);
    }
  };
  for (int r = 0; r + 1 < h; ++r) {
    for (int c = 0; c + 1 < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      cross(i, i + w);
      cross(i, i + 1);
    }
  }
  return {acc, Field(n, h, w, std::move(grad))};
}

LossResult dice_loss(const Field& pred, const IdMap& instances, const PEConfig& cfg) {
  cfg.validate();
  const int dim = cfg.pixel_dim();
  if (pred.channels() != dim) throw ShapeError("dice_loss: channel count must be 4L");
  if (pred.height() != instances.height() || pred.width() != instances.width()) {
    throw ShapeError("dice_loss: instance map does not match prediction size");
  }
  const auto centroids = instance_centroids(instances);
  if (centroids.empty()) throw DomainError("dice_loss: no labeled instances");

  struct Instance {
    std::uint32_t id;
    std::vector<double> code;
    double area = 0.0;
  };
  std::vector<Instance> inst;
  for (const auto& [id, c] : centroids) {
    Instance entry{id, std::vector<double>(dim), 0.0};
    gamma_into(c.u, cfg.harmonics, std::span<double>(entry.code).first(dim / 2));
    gamma_into(c.v, cfg.harmonics, std::span<double>(entry.code).subspan(dim / 2));
    inst.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i] == kVoidId) continue;
    auto it = std::lower_bound(inst.begin(), inst.end(), instances[i],
                               [](const Instance& a, std::uint32_t id) { return a.id < id; });
    it->area += 1.0;
  }

  const std::size_t plane = pred.plane_size();
  const std::size_t count = inst.size();
  // participation[l * plane + i]
  std::vector<double> participation(count * plane);
  double overlap = 0.0;   // sum_l w_l sum_i r p
  double predicted = 0.0; // sum_l w_l sum_i p
  for (std::size_t l = 0; l < count; ++l) {
    const double wl = 1.0 / inst[l].area;
    double overlap_l = 0.0;
    double predicted_l = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      double su = 0.0;
      double sv = 0.0;
      for (int k = 0; k < dim / 2; ++k) {
        const double d = pred[k * plane + i] - inst[l].code[k];
        su += d * d;
      }
      for (int k = dim / 2; k < dim; ++k) {
        const double d = pred[k * plane + i] - inst[l].code[k];
        sv += d * d;
      }
      const double p = std::exp(-su) * std::exp(-sv);
      participation[l * plane + i] = p;
      predicted_l += p;
      if (instances[i] == inst[l].id) overlap_l += p;
    }
    overlap += wl * overlap_l;
    predicted += wl * predicted_l;
  }
  // sum_l w_l sum_i r = number of instances.
  const double denom = static_cast<double>(count) + predicted;
  const double value = 1.0 - 2.0 * overlap / denom;

  std::vector<double> grad(pred.size(), 0.0);
  for (std::size_t l = 0; l < count; ++l) {
    const double wl = 1.0 / inst[l].area;
    for (std::size_t i = 0; i < plane; ++i) {
      const double r = instances[i] == inst[l].id ? 1.0 : 0.0;
      const double dl_dp = -2.0 * wl * (r * denom - overlap) / (denom * denom);
      const double p = participation[l * plane + i];
      if (p == 0.0) continue;
      for (int k = 0; k < dim; ++k) {
        const double d = pred[k * plane + i] - inst[l].code[k];
        grad[k * plane + i] += dl_dp * (-2.0 * d * p);
      }
    }
  }
  return {value, Field(dim, pred.height(), pred.width(), std::move(grad))};
}

LossResult affine_invariant_depth_loss(const Field& pred_disparity,
                                       const Field& target_disparity,
                                       const WeightMask& valid) {
  if (!pred_disparity.same_shape(target_disparity) || pred_disparity.channels() != 1) {
    throw ShapeError("affine_invariant_depth_loss: expected matching 1-channel fields");
  }
  check_plane(pred_disparity, valid, "affine_invariant_depth_loss");
  const ValidSet set = valid_pixels(valid);
  const std::size_t n = set.pixels.size();
  if (n < 2) throw DomainError("affine_invariant_depth_loss: need at least 2 valid pixels");

  std::vector<double> d(n);
  std::vector<double> dt(n);
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = pred_disparity[set.pixels[j]];
    dt[j] = target_disparity[set.pixels[j]];
  }
  const RobustStats sp = robust_stats(d);
  const RobustStats st = robust_stats(dt);
  if (!(sp.scale > 0.0) || !(st.scale > 0.0)) {
    throw DomainError("affine_invariant_depth_loss: degenerate scale s(d) = 0");
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> g(n);  // dL / d nhat_j
  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double nt = (dt[j] - st.median) / st.scale;
    const double np = (d[j] - sp.median) / sp.scale;
    value += std::abs(nt - np);
    g[j] = -inv_n * sign(nt - np);
  }
  value *= inv_n;

  // nhat_j = (d_j - t) / s; t and s depend on the prediction.
  double sum_g = 0.0;
  double sum_g_centered = 0.0;
  double sum_sign = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum_g += g[j];
    sum_g_centered += g[j] * (d[j] - sp.median);
    sum_sign += sign(d[j] - sp.median);
  }
  const double s = sp.scale;
  std::vector<double> grad(pred_disparity.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double dt_di = (!sp.median_tied && i == sp.median_slot) ? 1.0 : 0.0;
    const double ds_di = inv_n * (sign(d[i] - sp.median) - sum_sign * dt_di);
    grad[set.pixels[i]] = g[i] / s - dt_di * sum_g / s - sum_g_centered / (s * s) * ds_di;
  }
  return {value, Field(1, pred_disparity.height(), pred_disparity.width(), std::move(grad))};
}

LossResult silog_loss(const Field& pred_depth, const Field& target_depth,
                      const WeightMask& valid, double lambda) {
  if (!pred_depth.same_shape(target_depth) || pred_depth.channels() != 1) {
    throw ShapeError("silog_loss: expected matching 1-channel fields");
  }
  check_plane(pred_depth, valid, "silog_loss");
  const ValidSet set = valid_pixels(valid);
  const std::size_t n = set.pixels.size();
  if (n == 0) throw DomainError("silog_loss: no valid pixels");
  std::vector<double> diff(n);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double y = pred_depth[set.pixels[j]];
    const double ys = target_depth[set.pixels[j]];
    if (!(y > 0.0) || !(ys > 0.0)) {
      throw DomainError("silog_loss: depth must be positive on valid pixels");
    }
    diff[j] = std::log(y) - std::log(ys);
    sum += diff[j];
    sum_sq += diff[j] * diff[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double mean = sum * inv_n;
  const double value = sum_sq * inv_n - lambda * mean * mean;
  std::vector<double> grad(pred_depth.size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double y = pred_depth[set.pixels[j]];
    grad[set.pixels[j]] = (2.0 * diff[j] * inv_n - 2.0 * lambda * mean * inv_n) / y;
  }
  return {value, Field(1, pred_depth.height(), pred_depth.width(), std::move(grad))};
}

PanopticLoss panoptic_loss(const Field& semantic_logits, const IdMap& semantic_target,
                           std::optional<std::uint32_t> ignore,
                           const Field& instance_pred, const IdMap& instances,
                           const WeightMask& weights, const PEConfig& cfg,
                           const TaskLossWeights& task) {
  const Field target = encode_pe(instances, cfg);
  const LossResult sem = semantic_ce_loss(semantic_logits, semantic_target, weights, ignore);
  const LossResult inst = instance_pe_loss(instance_pred, target, weights);
  const LossResult tv_sem = tv_loss_ce(semantic_logits);
  const LossResult tv_inst = tv_loss_regression(instance_pred, TvNorm::kPositional);
  const LossResult dice = dice_loss(instance_pred, instances, cfg);

  PanopticLoss out;
  out.semantic = sem.value;
  out.instance = inst.value;
  out.tv_semantic = tv_sem.value;
  out.tv_instance = tv_inst.value;
  out.dice = dice.value;
  out.total = task.semantic * sem.value + task.instance * inst.value +
              task.tv * (tv_sem.value + tv_inst.value) + task.dice * dice.value;

  std::vector<double> gs(semantic_logits.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    gs[i] = task.semantic * sem.gradient[i] + task.tv * tv_sem.gradient[i];
  }
  std::vector<double> gi(instance_pred.size());
  for (std::size_t i = 0; i < gi.size(); ++i) {
    gi[i] = task.instance * inst.gradient[i] + task.tv * tv_inst.gradient[i] +
            task.dice * dice.gradient[i];
  }
  out.semantic_gradient = Field(semantic_logits.channels(), semantic_logits.height(),
                                semantic_logits.width(), std::move(gs));
  out.instance_gradient = Field(instance_pred.channels(), instance_pred.height(),
                                instance_pred.width(), std::move(gi));
  return out;
}

}  // namespace ppe
