// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppe/grid.hpp"
#include "ppe/panoptic.hpp"

namespace ppe {

/// Panoptic quality of one category.
struct CategoryPQ {
  std::uint32_t category_id = 0;
  bool is_thing = false;
  double iou_sum = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  double pq() const;
  double sq() const;  // iou_sum / tp, 0 without matches
  double rq() const;
};

struct PQSummary {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  std::size_t categories = 0;
};

/// Category-averaged PQ/SQ/RQ over categories with tp + fp + fn > 0.
/// pq == sq * rq holds per category; the averages need not satisfy it.
struct PQReport {
  PQSummary all;
  std::optional<PQSummary> things;
  std::optional<PQSummary> stuff;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::vector<CategoryPQ> per_category;

  double pq() const { return all.pq; }
  double sq() const { return all.sq; }
  double rq() const { return all.rq; }
};

/// Sums matches over images; accumulators merge by adding their counts.
class PQAccumulator {
 public:
  /// Segments match when they share a category and IoU > 0.5, where the
  /// union leaves out pixels of the prediction that are void in the truth.
  /// Unmatched predictions more than half inside truth void are ignored.
  void add(const PanopticSeg& pred, const PanopticSeg& truth);
  void merge(const PQAccumulator& other);
  PQReport report() const;

 private:
  std::map<std::uint32_t, CategoryPQ> stats_;
};

PQReport panoptic_quality(const PanopticSeg& pred, const PanopticSeg& truth);

/// Area bin [lower, upper); the last bin is unbounded above.
struct SizeBin {
  double lower = 0.0;
  std::optional<double> upper;
  std::int64_t count = 0;
  std::optional<double> mean_iou;  // unset for empty bins
};

struct IoUBySize {
  std::vector<SizeBin> bins;
};

/// Best-overlap IoU of every truth instance against the predicted
/// instances, averaged within area bins delimited by `thresholds`
/// ([0, t1), [t1, t2), ..., [tm, inf)). Thresholds must increase strictly.
IoUBySize iou_by_size(const IdMap& pred, const IdMap& truth,
                      std::span<const double> thresholds);

// Report layouts (keys are stable):
//   PQ JSON: {"pq","sq","rq","tp","fp","fn","categories",
//             "things":{...}|null,"stuff":{...}|null,
//             "per_category":[{"category_id","isthing","pq","sq","rq",
//                              "tp","fp","fn","iou_sum"}]}
//   PQ CSV:  category_id,isthing,pq,sq,rq,tp,fp,fn  (one row per category,
//            then an "all" row)
//   IoU CSV: bin_lower,bin_upper,count,mean_iou  (empty cells for inf / none)
std::string pq_report_json(const PQReport& report);
std::string pq_report_csv(const PQReport& report);
std::string iou_by_size_json(const IoUBySize& table);
std::string iou_by_size_csv(const IoUBySize& table);

}  // namespace ppe
