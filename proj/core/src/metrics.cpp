// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ppe/error.hpp"

namespace ppe {
namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

PQSummary summarize(const std::vector<const CategoryPQ*>& cats) {
  PQSummary s;
  for (const CategoryPQ* c : cats) {
    s.pq += c->pq();
    s.sq += c->sq();
    s.rq += c->rq();
  }
  s.categories = cats.size();
  if (!cats.empty()) {
    const double n = static_cast<double>(cats.size());
    s.pq /= n;
    s.sq /= n;
    s.rq /= n;
  }
  return s;
}

json summary_json(const PQSummary& s) {
  return {{"pq", s.pq}, {"sq", s.sq}, {"rq", s.rq}, {"categories", s.categories}};
}

}  // namespace

double CategoryPQ::pq() const {
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  return denom > 0.0 ? iou_sum / denom : 0.0;
}

double CategoryPQ::sq() const { return tp > 0 ? iou_sum / tp : 0.0; }

double CategoryPQ::rq() const {
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  return denom > 0.0 ? tp / denom : 0.0;
}

void PQAccumulator::add(const PanopticSeg& pred, const PanopticSeg& truth) {
  if (pred.segments.height() != truth.segments.height() ||
      pred.segments.width() != truth.segments.width()) {
    throw ShapeError("panoptic_quality: prediction and truth differ in size");
  }
  pred.validate();
  truth.validate();
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> overlap;
  std::map<std::uint32_t, std::int64_t> pred_area;
  std::map<std::uint32_t, std::int64_t> truth_area;
  const auto pids = pred.segments.ids();
  const auto tids = truth.segments.ids();
  for (std::size_t i = 0; i < pids.size(); ++i) {
    ++overlap[{tids[i], pids[i]}];
    if (pids[i] != kVoidId) ++pred_area[pids[i]];
    if (tids[i] != kVoidId) ++truth_area[tids[i]];
  }
  const auto void_part = [&](std::uint32_t pid) {
    auto it = overlap.find({kVoidId, pid});
    return it == overlap.end() ? std::int64_t{0} : it->second;
  };
  const auto stat = [&](std::uint32_t cat, bool thing) -> CategoryPQ& {
    auto [it, inserted] = stats_.try_emplace(cat);
    if (inserted) {
      it->second.category_id = cat;
      it->second.is_thing = thing;
    }
    return it->second;
  };

  std::set<std::uint32_t> matched_pred;
  std::set<std::uint32_t> matched_truth;
  for (const auto& [key, inter] : overlap) {
    const auto [tid, pid] = key;
    if (tid == kVoidId || pid == kVoidId) continue;
    const SegmentInfo& t = truth.info.at(tid);
    const SegmentInfo& p = pred.info.at(pid);
    if (t.category_id != p.category_id) continue;
    const double uni = static_cast<double>(truth_area[tid] + pred_area[pid] - inter -
                                           void_part(pid));
    const double iou = static_cast<double>(inter) / uni;
    if (iou > 0.5) {
      CategoryPQ& c = stat(t.category_id, t.is_thing);
      ++c.tp;
      c.iou_sum += iou;
      matched_pred.insert(pid);
      matched_truth.insert(tid);
    }
  }
  for (const auto& [tid, area] : truth_area) {
    if (matched_truth.count(tid)) continue;
    const SegmentInfo& t = truth.info.at(tid);
    ++stat(t.category_id, t.is_thing).fn;
  }
  for (const auto& [pid, area] : pred_area) {
    if (matched_pred.count(pid)) continue;
    if (static_cast<double>(void_part(pid)) / area > 0.5) continue;
    const SegmentInfo& p = pred.info.at(pid);
    ++stat(p.category_id, p.is_thing).fp;
  }
}

void PQAccumulator::merge(const PQAccumulator& other) {
  for (const auto& [cat, c] : other.stats_) {
    auto [it, inserted] = stats_.try_emplace(cat, c);
    if (inserted) continue;
    it->second.iou_sum += c.iou_sum;
    it->second.tp += c.tp;
    it->second.fp += c.fp;
    it->second.fn += c.fn;
  }
}

PQReport PQAccumulator::report() const {
  PQReport r;
  std::vector<const CategoryPQ*> all;
  std::vector<const CategoryPQ*> things;
  std::vector<const CategoryPQ*> stuff;
  for (const auto& [cat, c] : stats_) {
    if (c.tp + c.fp + c.fn == 0) continue;
    r.per_category.push_back(c);
    r.tp += c.tp;
    r.fp += c.fp;
    r.fn += c.fn;
  }
  for (const CategoryPQ& c : r.per_category) {
    all.push_back(&c);
    (c.is_thing ? things : stuff).push_back(&c);
  }
  r.all = summarize(all);
  if (!things.empty()) r.things = summarize(things);
  if (!stuff.empty()) r.stuff = summarize(stuff);
  return r;
}

PQReport panoptic_quality(const PanopticSeg& pred, const PanopticSeg& truth) {
  PQAccumulator acc;
  acc.add(pred, truth);
  return acc.report();
}

IoUBySize iou_by_size(const IdMap& pred, const IdMap& truth,
                      std::span<const double> thresholds) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ShapeError("iou_by_size: prediction and truth differ in size");
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > 0.0) || (k > 0 && !(thresholds[k] > thresholds[k - 1]))) {
      throw DomainError("iou_by_size: thresholds must be positive and strictly increasing");
    }
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> overlap;
  std::map<std::uint32_t, std::int64_t> pred_area;
  std::map<std::uint32_t, std::int64_t> truth_area;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::uint32_t t = truth[i];
    const std::uint32_t p = pred[i];
    if (p != kVoidId) ++pred_area[p];
    if (t == kVoidId) continue;
    ++truth_area[t];
    if (p != kVoidId) ++overlap[{t, p}];
  }
  std::map<std::uint32_t, double> best;
  for (const auto& [key, inter] : overlap) {
    const auto [t, p] = key;
    const double iou = static_cast<double>(inter) /
                       static_cast<double>(truth_area[t] + pred_area[p] - inter);
    double& b = best[t];
    b = std::max(b, iou);
  }

  IoUBySize table;
  double lower = 0.0;
  for (double t : thresholds) {
    table.bins.push_back({lower, t, 0, std::nullopt});
    lower = t;
  }
  table.bins.push_back({lower, std::nullopt, 0, std::nullopt});
  std::vector<double> sums(table.bins.size(), 0.0);
  for (const auto& [t, area] : truth_area) {
    const auto a = static_cast<double>(area);
    const auto slot = static_cast<std::size_t>(
        std::upper_bound(thresholds.begin(), thresholds.end(), a) - thresholds.begin());
    ++table.bins[slot].count;
    auto it = best.find(t);
    sums[slot] += it == best.end() ? 0.0 : it->second;
  }
  for (std::size_t k = 0; k < table.bins.size(); ++k) {
    if (table.bins[k].count > 0) {
      table.bins[k].mean_iou = sums[k] / static_cast<double>(table.bins[k].count);
    }
  }
  return table;
}

std::string pq_report_json(const PQReport& report) {
  json cats = json::array();
  for (const CategoryPQ& c : report.per_category) {
    cats.push_back({{"category_id", c.category_id},
                    {"isthing", c.is_thing ? 1 : 0},
                    {"pq", c.pq()},
                    {"sq", c.sq()},
                    {"rq", c.rq()},
                    {"tp", c.tp},
                    {"fp", c.fp},
                    {"fn", c.fn},
                    {"iou_sum", c.iou_sum}});
  }
  json doc = {{"pq", report.all.pq},
              {"sq", report.all.sq},
              {"rq", report.all.rq},
              {"tp", report.tp},
              {"fp", report.fp},
              {"fn", report.fn},
              {"categories", report.all.categories},
              {"things", report.things ? summary_json(*report.things) : json(nullptr)},
              {"stuff", report.stuff ? summary_json(*report.stuff) : json(nullptr)},
              {"per_category", cats}};
  return doc.dump(2) + "\n";
}

std::string pq_report_csv(const PQReport& report) {
  std::ostringstream out;
  out << "category_id,isthing,pq,sq,rq,tp,fp,fn\n";
  for (const CategoryPQ& c : report.per_category) {
    out << c.category_id << ',' << (c.is_thing ? 1 : 0) << ',' << num(c.pq()) << ','
        << num(c.sq()) << ',' << num(c.rq()) << ',' << c.tp << ',' << c.fp << ','
        << c.fn << '\n';
  }
  out << "all,," << num(report.all.pq) << ',' << num(report.all.sq) << ','
      << num(report.all.rq) << ',' << report.tp << ',' << report.fp << ',' << report.fn
      << '\n';
  return out.str();
}

std::string iou_by_size_json(const IoUBySize& table) {
  json bins = json::array();
  for (const SizeBin& b : table.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper ? json(*b.upper) : json(nullptr)},
                    {"count", b.count},
                    {"mean_iou", b.mean_iou ? json(*b.mean_iou) : json(nullptr)}});
  }
  return json{{"bins", bins}}.dump(2) + "\n";
}

std::string iou_by_size_csv(const IoUBySize& table) {
  std::ostringstream out;
  out << "bin_lower,bin_upper,count,mean_iou\n";
  for (const SizeBin& b : table.bins) {
    out << num(b.lower) << ',' << (b.upper ? num(*b.upper) : std::string()) << ','
        << b.count << ',' << (b.mean_iou ? num(*b.mean_iou) : std::string()) << '\n';
  }
  return out.str();
}

}  // namespace ppe
