// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppe/grid.hpp"
#include "ppe/label_codec.hpp"

namespace ppe {

struct Category {
  std::uint32_t id = 0;
  std::string name;
  bool is_thing = false;
};

/// Category id -> metadata. Class 0 is reserved for void and never listed.
class CategoryTable {
 public:
  CategoryTable() = default;
  explicit CategoryTable(std::vector<Category> categories);

  bool contains(std::uint32_t id) const { return by_id_.count(id) != 0; }
  bool is_thing(std::uint32_t id) const;
  bool is_stuff(std::uint32_t id) const;
  const Category& at(std::uint32_t id) const;
  std::vector<Category> categories() const;
  std::size_t size() const { return by_id_.size(); }

 private:
  std::map<std::uint32_t, Category> by_id_;
};

/// Grouping/suppression parameters that turn decoded cells into instances.
struct FusionConfig {
  /// Unset means max(32, 0.0005 H W).
  std::optional<int> min_instance_area;
  double merge_radius = 1.5;  // grid cells
  CategoryTable categories;

  int effective_min_area(int height, int width) const;
  void validate() const;
};

struct SegmentInfo {
  std::uint32_t category_id = 0;
  bool is_thing = false;
  std::int64_t area = 0;
  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

/// Segment id per pixel (0 = void) plus the segment table.
struct PanopticSeg {
  IdMap segments;
  std::map<std::uint32_t, SegmentInfo> info;

  /// Throws DomainError when a labeled pixel has no table entry or a stuff
  /// category owns more than one segment.
  void validate() const;
};

/// Groups pixels by decoded cell, merges each group into the largest
/// already-kept group whose cell centre lies within merge_radius, drops
/// groups smaller than the minimum area and numbers the survivors 1..K in
/// decreasing size order.
IdMap cluster_instances(const CellMap& cells, const UVGrid& grid,
                        const FusionConfig& cfg);

/// Per-pixel argmax over channels; ties go to the lowest channel.
IdMap semantic_argmax(const Field& logits);

/// Each instance takes its modal thing class (ties to the lowest id) or
/// dissolves. Pixels outside surviving instances join the single segment of
/// their stuff class; thing or unknown classes there become void.
/// Instances keep ids 1..K, stuff segments follow in increasing class order.
PanopticSeg majority_vote(const IdMap& instances, const IdMap& semantic,
                          const FusionConfig& cfg);

/// decode_pe -> cluster_instances -> majority_vote.
PanopticSeg fuse(const Field& semantic_logits, const Field& instance_pred,
                 const UVGrid& grid, const FusionConfig& cfg);

/// One-hot logits (margin on the given class) for a class-index map.
Field one_hot_logits(const IdMap& classes, int num_classes, double margin = 10.0);

/// Builds a PanopticSeg from an instance map and a semantic map: thing
/// pixels group by instance id, stuff pixels by class, void and unknown
/// classes map to 0. Segment ids are assigned in the same order as
/// majority_vote.
PanopticSeg panoptic_from_labels(const IdMap& instances, const IdMap& semantic,
                                 const CategoryTable& categories);

/// Treats every non-zero id as its own segment of one thing category.
PanopticSeg panoptic_from_ids(const IdMap& segments, std::uint32_t category_id = 1);

// JSON layouts:
//   categories: {"categories": [{"id": 1, "name": "...", "isthing": 1}, ...]}
//   segments:   {"segments_info": [{"id": 1, "category_id": 7, "isthing": 1,
//                                   "area": 120}, ...]}
CategoryTable parse_category_table(const std::string& json_text);
std::string category_table_json(const CategoryTable& table);
std::string segment_table_json(const PanopticSeg& seg);
/// Pairs a segment PNG map with its table. Areas are recomputed from the map.
PanopticSeg parse_segment_table(const IdMap& segments, const std::string& json_text);

}  // namespace ppe
