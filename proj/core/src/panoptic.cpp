// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/panoptic.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "ppe/error.hpp"

namespace ppe {
namespace {

using nlohmann::json;

void check_same_dims(const IdMap& a, const IdMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": map dimensions differ");
  }
}

bool json_is_thing(const json& entry) {
  const json* flag = nullptr;
  if (entry.contains("isthing")) {
    flag = &entry["isthing"];
  } else if (entry.contains("is_thing")) {
    flag = &entry["is_thing"];
  } else {
    throw FormatError("category entry lacks an isthing flag");
  }
  if (flag->is_boolean()) return flag->get<bool>();
  if (flag->is_number_integer()) return flag->get<int>() != 0;
  throw FormatError("isthing must be 0/1 or a boolean");
}

// Segment ids for a set of thing instances (already ordered) and stuff
// pixels, shared by majority_vote and panoptic_from_labels.
struct SegmentBuilder {
  std::vector<std::uint32_t> pixel_segment;
  std::map<std::uint32_t, SegmentInfo> info;
};

}  // namespace

CategoryTable::CategoryTable(std::vector<Category> categories) {
  for (auto& c : categories) {
    if (c.id == kVoidId) throw DomainError("category id 0 is reserved for void");
    if (!by_id_.emplace(c.id, c).second) {
      throw DomainError("duplicate category id " + std::to_string(c.id));
    }
  }
}

bool CategoryTable::is_thing(std::uint32_t id) const {
  auto it = by_id_.find(id);
  return it != by_id_.end() && it->second.is_thing;
}

bool CategoryTable::is_stuff(std::uint32_t id) const {
  auto it = by_id_.find(id);
  return it != by_id_.end() && !it->second.is_thing;
}

const Category& CategoryTable::at(std::uint32_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DomainError("unknown category " + std::to_string(id));
  return it->second;
}

std::vector<Category> CategoryTable::categories() const {
  std::vector<Category> out;
  for (const auto& [id, c] : by_id_) out.push_back(c);
  return out;
}

int FusionConfig::effective_min_area(int height, int width) const {
  if (min_instance_area) return *min_instance_area;
  const double scaled = 0.0005 * static_cast<double>(height) * width;
  return std::max(32, static_cast<int>(std::ceil(scaled)));
}

void FusionConfig::validate() const {
  if (min_instance_area && *min_instance_area < 1) {
    throw DomainError("min_instance_area must be >= 1");
  }
  if (!(merge_radius >= 0.0) || !std::isfinite(merge_radius)) {
    throw DomainError("merge_radius must be >= 0");
  }
}

void PanopticSeg::validate() const {
  for (std::uint32_t id : segments.ids()) {
    if (id != kVoidId && info.count(id) == 0) {
      throw DomainError("segment " + std::to_string(id) + " missing from table");
    }
  }
  std::set<std::uint32_t> stuff;
  for (const auto& [id, s] : info) {
    if (!s.is_thing && !stuff.insert(s.category_id).second) {
      throw DomainError("stuff category " + std::to_string(s.category_id) +
                        " has more than one segment");
    }
  }
}

IdMap cluster_instances(const CellMap& cells, const UVGrid& grid, const FusionConfig& cfg) {
  cfg.validate();
  std::map<std::int32_t, std::int64_t> sizes;
  for (std::int32_t cell : cells.cells()) {
    if (cell != cells.void_index()) ++sizes[cell];
  }
  struct Group {
    std::int32_t cell;
    std::int64_t size;
  };
  std::vector<Group> groups;
  for (const auto& [cell, size] : sizes) groups.push_back({cell, size});
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Group& a, const Group& b) { return a.size > b.size; });

  struct Kept {
    std::int32_t cell;
    std::int64_t size;
  };
  std::vector<Kept> kept;
  std::map<std::int32_t, std::size_t> owner;  // cell -> kept slot
  for (const Group& g : groups) {
    const int gr = g.cell / grid.cols();
    const int gc = g.cell % grid.cols();
    std::size_t slot = kept.size();
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const double dr = gr - kept[k].cell / grid.cols();
      const double dc = gc - kept[k].cell % grid.cols();
      if (std::sqrt(dr * dr + dc * dc) <= cfg.merge_radius) {
        slot = k;
        break;
      }
    }
    if (slot == kept.size()) {
      kept.push_back({g.cell, g.size});
    } else {
      kept[slot].size += g.size;
    }
    owner[g.cell] = slot;
  }

  const int min_area = cfg.effective_min_area(cells.height(), cells.width());
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (kept[k].size >= min_area) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (kept[a].size != kept[b].size) return kept[a].size > kept[b].size;
    return kept[a].cell < kept[b].cell;
  });
  std::vector<std::uint32_t> slot_id(kept.size(), kVoidId);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    slot_id[order[rank]] = static_cast<std::uint32_t>(rank + 1);
  }
  std::vector<std::uint32_t> ids(cells.cells().size(), kVoidId);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int32_t cell = cells.cells()[i];
    if (cell == cells.void_index()) continue;
    ids[i] = slot_id[owner.at(cell)];
  }
  return IdMap(cells.height(), cells.width(), std::move(ids));
}

IdMap semantic_argmax(const Field& logits) {
  if (logits.channels() < 1) throw ShapeError("semantic_argmax: no channels");
  const std::size_t plane = logits.plane_size();
  std::vector<std::uint32_t> ids(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int k = 1; k < logits.channels(); ++k) {
      if (logits[k * plane + i] > logits[best * plane + i]) best = k;
    }
    ids[i] = static_cast<std::uint32_t>(best);
  }
  return IdMap(logits.height(), logits.width(), std::move(ids));
}

PanopticSeg majority_vote(const IdMap& instances, const IdMap& semantic,
                          const FusionConfig& cfg) {
  check_same_dims(instances, semantic, "majority_vote");
  const CategoryTable& cats = cfg.categories;
  std::map<std::uint32_t, std::map<std::uint32_t, std::int64_t>> votes;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::uint32_t inst = instances[i];
    if (inst == kVoidId) continue;
    auto& hist = votes[inst];
    if (cats.is_thing(semantic[i])) ++hist[semantic[i]];
  }
  // Surviving instances keep their relative order and are renumbered 1..K.
  std::map<std::uint32_t, std::uint32_t> instance_segment;
  std::map<std::uint32_t, SegmentInfo> info;
  std::uint32_t next = 1;
  for (const auto& [inst, hist] : votes) {
    if (hist.empty()) continue;
    std::uint32_t best = 0;
    std::int64_t best_count = -1;
    for (const auto& [cls, count] : hist) {
      if (count > best_count) {
        best = cls;
        best_count = count;
      }
    }
    instance_segment[inst] = next;
    info[next] = SegmentInfo{best, true, 0};
    ++next;
  }
  std::set<std::uint32_t> stuff_present;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i] != kVoidId && instance_segment.count(instances[i])) continue;
    if (cats.is_stuff(semantic[i])) stuff_present.insert(semantic[i]);
  }
  std::map<std::uint32_t, std::uint32_t> stuff_segment;
  for (std::uint32_t cls : stuff_present) {
    stuff_segment[cls] = next;
    info[next] = SegmentInfo{cls, false, 0};
    ++next;
  }

  std::vector<std::uint32_t> ids(instances.size(), kVoidId);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::uint32_t inst = instances[i];
    if (inst != kVoidId) {
      auto it = instance_segment.find(inst);
      if (it != instance_segment.end()) {
        ids[i] = it->second;
        continue;
      }
    }
    auto st = stuff_segment.find(semantic[i]);
    if (st != stuff_segment.end()) ids[i] = st->second;
  }
  for (std::uint32_t id : ids) {
    if (id != kVoidId) ++info[id].area;
  }
  return PanopticSeg{IdMap(instances.height(), instances.width(), std::move(ids)),
                     std::move(info)};
}

PanopticSeg fuse(const Field& semantic_logits, const Field& instance_pred,
                 const UVGrid& grid, const FusionConfig& cfg) {
  if (semantic_logits.height() != instance_pred.height() ||
      semantic_logits.width() != instance_pred.width()) {
    throw ShapeError("fuse: semantic and instance predictions differ in size");
  }
  const CellMap cells = decode_pe(instance_pred, grid);
  const IdMap instances = cluster_instances(cells, grid, cfg);
  return majority_vote(instances, semantic_argmax(semantic_logits), cfg);
}

Field one_hot_logits(const IdMap& classes, int num_classes, double margin) {
  if (num_classes < 1) throw DomainError("one_hot_logits: need at least one class");
  const std::size_t plane = classes.size();
  std::vector<double> values(plane * num_classes, 0.0);
  for (std::size_t i = 0; i < plane; ++i) {
    if (classes[i] >= static_cast<std::uint32_t>(num_classes)) {
      throw RangeError("one_hot_logits: class index out of range");
    }
    values[classes[i] * plane + i] = margin;
  }
  return Field(num_classes, classes.height(), classes.width(), std::move(values));
}

PanopticSeg panoptic_from_labels(const IdMap& instances, const IdMap& semantic,
                                 const CategoryTable& categories) {
  check_same_dims(instances, semantic, "panoptic_from_labels");
  // Thing segments: distinct (instance, class) on thing pixels with an instance.
  std::map<std::uint32_t, std::int64_t> area;
  std::map<std::uint32_t, std::uint32_t> category;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i] == kVoidId || !categories.is_thing(semantic[i])) continue;
    ++area[instances[i]];
    auto [it, inserted] = category.emplace(instances[i], semantic[i]);
    if (!inserted && it->second != semantic[i]) {
      throw DomainError("instance " + std::to_string(instances[i]) +
                        " spans several thing classes");
    }
  }
  std::vector<std::uint32_t> order;
  for (const auto& [inst, a] : area) order.push_back(inst);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return area[a] > area[b]; });
  std::map<std::uint32_t, std::uint32_t> seg_of;
  std::map<std::uint32_t, SegmentInfo> info;
  std::uint32_t next = 1;
  for (std::uint32_t inst : order) {
    seg_of[inst] = next;
    info[next] = SegmentInfo{category[inst], true, 0};
    ++next;
  }
  std::map<std::uint32_t, std::uint32_t> stuff_of;
  std::set<std::uint32_t> stuff_present;
  for (std::size_t i = 0; i < semantic.size(); ++i) {
    if (categories.is_stuff(semantic[i])) stuff_present.insert(semantic[i]);
  }
  for (std::uint32_t cls : stuff_present) {
    stuff_of[cls] = next;
    info[next] = SegmentInfo{cls, false, 0};
    ++next;
  }
  std::vector<std::uint32_t> ids(instances.size(), kVoidId);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (categories.is_thing(semantic[i])) {
      if (instances[i] != kVoidId) ids[i] = seg_of.at(instances[i]);
    } else if (categories.is_stuff(semantic[i])) {
      ids[i] = stuff_of.at(semantic[i]);
    }
  }
  for (std::uint32_t id : ids) {
    if (id != kVoidId) ++info[id].area;
  }
  return PanopticSeg{IdMap(instances.height(), instances.width(), std::move(ids)),
                     std::move(info)};
}

PanopticSeg panoptic_from_ids(const IdMap& segments, std::uint32_t category_id) {
  std::map<std::uint32_t, SegmentInfo> info;
  for (std::uint32_t id : segments.ids()) {
    if (id == kVoidId) continue;
    auto& entry = info[id];
    entry.category_id = category_id;
    entry.is_thing = true;
    ++entry.area;
  }
  return PanopticSeg{segments, std::move(info)};
}

CategoryTable parse_category_table(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("category table: ") + e.what());
  }
  const json& list = doc.is_array() ? doc : doc.value("categories", json::array());
  if (!list.is_array()) throw FormatError("category table: expected a list");
  std::vector<Category> cats;
  try {
    for (const json& entry : list) {
      Category c;
      c.id = entry.at("id").get<std::uint32_t>();
      c.name = entry.value("name", std::string());
      c.is_thing = json_is_thing(entry);
      cats.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("category table: ") + e.what());
  }
  try {
    return CategoryTable(std::move(cats));
  } catch (const DomainError& e) {
    throw FormatError(std::string("category table: ") + e.what());
  }
}

std::string category_table_json(const CategoryTable& table) {
  json list = json::array();
  for (const Category& c : table.categories()) {
    list.push_back({{"id", c.id}, {"name", c.name}, {"isthing", c.is_thing ? 1 : 0}});
  }
  return json{{"categories", list}}.dump(2) + "\n";
}

std::string segment_table_json(const PanopticSeg& seg) {
  json list = json::array();
  for (const auto& [id, s] : seg.info) {
    list.push_back({{"id", id},
                    {"category_id", s.category_id},
                    {"isthing", s.is_thing ? 1 : 0},
                    {"area", s.area}});
  }
  return json{{"segments_info", list}}.dump(2) + "\n";
}

PanopticSeg parse_segment_table(const IdMap& segments, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("segment table: ") + e.what());
  }
  const json& list = doc.is_array() ? doc : doc.value("segments_info", json::array());
  PanopticSeg seg{segments, {}};
  try {
    for (const json& entry : list) {
      SegmentInfo s;
      s.category_id = entry.at("category_id").get<std::uint32_t>();
      s.is_thing = json_is_thing(entry);
      seg.info[entry.at("id").get<std::uint32_t>()] = s;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("segment table: ") + e.what());
  }
  for (std::uint32_t id : segments.ids()) {
    if (id == kVoidId) continue;
    auto it = seg.info.find(id);
    if (it == seg.info.end()) {
      throw FormatError("segment table: id " + std::to_string(id) + " absent");
    }
    ++it->second.area;
  }
  return seg;
}

}  // namespace ppe
