// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>

#include "ppe/grid.hpp"
#include "ppe/label_codec.hpp"

namespace ppe {

/// Scalar loss and its gradient with respect to the prediction argument.
struct LossResult {
  double value = 0.0;
  Field gradient;
};

/// sum(w * l) / sum(w). Throws DomainError when every weight is zero.
double weighted_reduce(const Field& per_pixel, const WeightMask& weights);

/// Per pixel 0.5 * (|d_u| + |d_v|) with d = pred - target split into its
/// u and v halves, reduced with the weights. Zero-length halves contribute
/// a zero subgradient.
LossResult instance_pe_loss(const Field& pred, const Field& target,
                            const WeightMask& weights);

/// Per pixel mean absolute error over channels, reduced with the weights.
/// This is the direct-regression baseline loss.
LossResult direct_l1_loss(const Field& pred, const Field& target,
                          const WeightMask& weights);

/// Softmax cross-entropy over N channels. Pixels whose class equals
/// `ignore` get weight 0. Throws RangeError for class indices >= N.
LossResult semantic_ce_loss(const Field& logits, const IdMap& target,
                            const WeightMask& weights,
                            std::optional<std::uint32_t> ignore = std::nullopt);

enum class TvNorm { kL1, kL2, kPositional };

/// Unweighted mean over every vertical and horizontal neighbour pair of
/// the norm of the difference. kPositional uses the mean of the u-half and
/// v-half Euclidean norms.
LossResult tv_loss_regression(const Field& pred, TvNorm norm);

/// Sum over pixels (i, j) with i < H-1, j < W-1 of
/// 0.5 * (H(P_ij, P_i+1,j) + H(P_ij, P_i,j+1)), H(a, b) = -sum a log b,
/// P the softmax of the logits. Requires H, W >= 2.
LossResult tv_loss_ce(const Field& logits);

/// Generalised DICE with fuzzy participation
/// p = exp(-|pred_u - t_u|^2) exp(-|pred_v - t_v|^2) against each instance's
/// centroid encoding t and instance weights 1 / area.
/// Throws DomainError when the map has no labeled instance.
LossResult dice_loss(const Field& pred, const IdMap& instances, const PEConfig& cfg);

/// Mean over valid pixels of |n(target) - n(pred)|, n(d) = (d - median) / s,
/// s = mean |d - median|, statistics over valid pixels (weight > 0) only.
/// Median and scale are differentiated as functions of the prediction.
LossResult affine_invariant_depth_loss(const Field& pred_disparity,
                                       const Field& target_disparity,
                                       const WeightMask& valid);

/// mean(d^2) - lambda mean(d)^2 with d = log pred - log target over valid
/// pixels. Throws DomainError on non-positive depth at a valid pixel.
LossResult silog_loss(const Field& pred_depth, const Field& target_depth,
                      const WeightMask& valid, double lambda = 0.5);

/// Relative weights of the panoptic training terms.
struct TaskLossWeights {
  double semantic = 1.0;
  double instance = 1.0;
  double tv = 1.0;
  double dice = 1.0;
};

struct PanopticLoss {
  double semantic = 0.0;
  double instance = 0.0;
  double tv_semantic = 0.0;
  double tv_instance = 0.0;
  double dice = 0.0;
  double total = 0.0;
  Field semantic_gradient;
  Field instance_gradient;
};

/// Weighted sum of semantic CE, instance PE loss (both weighted by
/// `weights`), both TV terms and the DICE loss.
PanopticLoss panoptic_loss(const Field& semantic_logits, const IdMap& semantic_target,
                           std::optional<std::uint32_t> ignore,
                           const Field& instance_pred, const IdMap& instances,
                           const WeightMask& weights, const PEConfig& cfg,
                           const TaskLossWeights& task = {});

}  // namespace ppe
