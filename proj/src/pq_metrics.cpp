#include "opseval/pq_metrics.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <cstring>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "opseval/kernels.hpp"

namespace opseval {

namespace {

// Open-addressing histogram over packed (gt_id, pred_id) keys. The number of
// distinct pairs per image is tiny compared to the pixel count, so a linear
// probe with power-of-two capacity keeps the per-pixel cost at a few ns.
class PairHistogram {
 public:
  struct Slot {
    std::uint64_t key = kEmpty;
    long long count = 0;
  };
  static constexpr std::uint64_t kEmpty = ~0ull;

  explicit PairHistogram(size_t expected_pairs = 64) { rehash(capacity_for(expected_pairs)); }

  void add(std::uint64_t key) {
    if (size_ * 2 >= slots_.size()) rehash(slots_.size() * 2);
    Slot& s = probe(key);
    if (s.key == kEmpty) {
      s.key = key;
      ++size_;
    }
    ++s.count;
  }

  const std::vector<Slot>& slots() const { return slots_; }

 private:
  static size_t capacity_for(size_t n) { return std::bit_ceil(std::max<size_t>(16, n * 2)); }

  Slot& probe(std::uint64_t key) {
    // splitmix64 finalizer
    std::uint64_t h = key + 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    h ^= h >> 31;
    size_t i = h & mask_;
    while (slots_[i].key != kEmpty && slots_[i].key != key) i = (i + 1) & mask_;
    return slots_[i];
  }

  void rehash(size_t new_cap) {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(new_cap, Slot{});
    mask_ = new_cap - 1;
    for (const Slot& s : old) {
      if (s.key == kEmpty) continue;
      Slot& dst = probe(s.key);
      dst.key = s.key;
      dst.count = s.count;
    }
  }

  std::vector<Slot> slots_;
  size_t mask_ = 0;
  size_t size_ = 0;
};

constexpr std::uint64_t pack(SegmentId gt, SegmentId pred) {
  return (static_cast<std::uint64_t>(gt) << 32) | pred;
}

}  // namespace

MatchStats match_image(const PanopticAnnotation& gt, const PanopticAnnotation& pred,
                       const CategoryRegistry& registry, const MatchOptions& opts) {
  if (gt.map.width != pred.map.width || gt.map.height != pred.map.height)
    throw DimensionMismatch(fmt::format("gt is {}x{} but pred is {}x{}", gt.map.width,
                                        gt.map.height, pred.map.width, pred.map.height));

  const size_t n = gt.map.pixel_count();
  std::vector<std::uint64_t> keys(n);
  kernels::pack_pair_keys(gt.map.ids.data(), pred.map.ids.data(), n, keys.data());

  PairHistogram hist(gt.segments.size() * 4 + pred.segments.size() * 4 + 16);
  for (std::uint64_t k : keys) hist.add(k);

  std::unordered_map<SegmentId, const SegmentInfo*> gt_info, pred_info;
  for (const auto& s : gt.segments) gt_info.emplace(s.id, &s);
  for (const auto& s : pred.segments) pred_info.emplace(s.id, &s);

  // Areas derived from the joint histogram so matching is self-consistent.
  std::unordered_map<SegmentId, long long> gt_area, pred_area;
  std::unordered_map<SegmentId, long long> pred_on_void;   // pred ∩ gt-void
  std::unordered_map<SegmentId, long long> pred_on_crowd;  // pred ∩ gt-crowd
  for (const auto& slot : hist.slots()) {
    if (slot.key == PairHistogram::kEmpty) continue;
    const SegmentId g = static_cast<SegmentId>(slot.key >> 32);
    const SegmentId p = static_cast<SegmentId>(slot.key & 0xffffffffu);
    if (g != kVoidId) gt_area[g] += slot.count;
    if (p != kVoidId) {
      pred_area[p] += slot.count;
      if (g == kVoidId) pred_on_void[p] += slot.count;
      else if (auto it = gt_info.find(g); it != gt_info.end() && it->second->crowd)
        pred_on_crowd[p] += slot.count;
    }
  }

  MatchStats stats;
  for (const auto& s : gt.segments) ++stats.per_category[s.category].gt_segments;
  for (const auto& s : pred.segments) ++stats.per_category[s.category].pred_segments;

  std::unordered_map<SegmentId, bool> gt_matched, pred_matched;

  for (const auto& slot : hist.slots()) {
    if (slot.key == PairHistogram::kEmpty) continue;
    const SegmentId g = static_cast<SegmentId>(slot.key >> 32);
    const SegmentId p = static_cast<SegmentId>(slot.key & 0xffffffffu);
    if (g == kVoidId || p == kVoidId) continue;
    const auto git = gt_info.find(g);
    const auto pit = pred_info.find(p);
    if (git == gt_info.end() || pit == pred_info.end()) continue;
    if (git->second->category != pit->second->category) continue;
    if (!opts.strict && git->second->crowd) continue;

    const long long inter = slot.count;
    long long uni = gt_area[g] + pred_area[p] - inter;
    if (!opts.strict) uni -= pred_on_void[p];
    if (uni <= 0) continue;
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    if (iou > 0.5) {
      // IoU > 0.5 makes the pairing unique on both sides.
      auto& c = stats.per_category[git->second->category];
      ++c.tp;
      c.iou_sum += iou;
      gt_matched[g] = true;
      pred_matched[p] = true;
    }
  }

  for (const auto& s : gt.segments) {
    if (gt_matched[s.id]) continue;
    if (!opts.strict && s.crowd) continue;  // crowd GT never counts as FN
    ++stats.per_category[s.category].fn_;
  }

  for (const auto& s : pred.segments) {
    if (pred_matched[s.id]) continue;
    if (!opts.strict) {
      const long long ignored = pred_on_void[s.id] + pred_on_crowd[s.id];
      const long long area = pred_area[s.id];
      if (2 * ignored > area) continue;  // mostly void/crowd: not penalized
    }
    ++stats.per_category[s.category].fp;
  }
  return stats;
}

MatchStats accumulate(const std::vector<MatchStats>& stats) {
  MatchStats out;
  for (const auto& s : stats) {
    for (const auto& [cat, c] : s.per_category) {
      auto& dst = out.per_category[cat];
      dst.tp += c.tp;
      dst.fp += c.fp;
      dst.fn_ += c.fn_;
      dst.iou_sum += c.iou_sum;
      dst.gt_segments += c.gt_segments;
      dst.pred_segments += c.pred_segments;
    }
  }
  return out;
}

namespace {

MetricRow row_from_counts(const std::string& label, const CategoryStats& c) {
  MetricRow r;
  r.label = label;
  r.tp = c.tp;
  r.fp = c.fp;
  r.fn_ = c.fn_;
  r.n_categories = 1;
  r.sq = c.tp > 0 ? c.iou_sum / static_cast<double>(c.tp) : 0.0;
  const double denom = c.tp + 0.5 * c.fp + 0.5 * c.fn_;
  r.rq = denom > 0 ? c.tp / denom : 0.0;
  r.pq = r.sq * r.rq;
  r.recall = c.tp + c.fn_ > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn_) : 0.0;
  r.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  return r;
}

MetricRow group_row(const std::string& label, const std::vector<const MetricRow*>& members) {
  MetricRow g;
  g.label = label;
  g.n_categories = static_cast<int>(members.size());
  for (const auto* m : members) {
    g.pq += m->pq;
    g.sq += m->sq;
    g.rq += m->rq;
    g.recall += m->recall;
    g.precision += m->precision;
    g.tp += m->tp;
    g.fp += m->fp;
    g.fn_ += m->fn_;
  }
  if (!members.empty()) {
    const double n = static_cast<double>(members.size());
    g.pq /= n;
    g.sq /= n;
    g.rq /= n;
    g.recall /= n;
    g.precision /= n;
  }
  return g;
}

}  // namespace

const MetricRow* MetricReport::group(const std::string& label) const {
  for (const auto& g : groups)
    if (g.label == label) return &g;
  return nullptr;
}

MetricReport report(const MatchStats& stats, const CategoryRegistry& registry) {
  MetricReport rep;
  std::vector<std::pair<CategoryId, const MetricRow*>> present;

  for (const auto& [cat, c] : stats.per_category) {
    if (c.gt_segments + c.pred_segments == 0 && c.tp + c.fp + c.fn_ == 0) continue;
    const auto* entry = registry.find(cat);
    const std::string label = entry != nullptr ? entry->name : fmt::format("category-{}", cat);
    rep.categories.push_back(row_from_counts(label, c));
  }
  // rows are in per_category (id) order; pair them back with their ids
  {
    size_t i = 0;
    for (const auto& [cat, c] : stats.per_category) {
      if (c.gt_segments + c.pred_segments == 0 && c.tp + c.fp + c.fn_ == 0) continue;
      present.emplace_back(cat, &rep.categories[i++]);
    }
  }

  auto members = [&](auto&& pred) {
    std::vector<const MetricRow*> out;
    for (const auto& [cat, row] : present)
      if (pred(cat)) out.push_back(row);
    return out;
  };
  auto status_is = [&](CategoryId id, Status s) {
    const auto* e = registry.find(id);
    return e != nullptr && e->status == s;
  };

  rep.groups.push_back(group_row("known", members([&](CategoryId c) {
    return status_is(c, Status::Known);
  })));
  rep.groups.push_back(group_row("unknown", members([&](CategoryId c) {
    return status_is(c, Status::Unknown);
  })));
  rep.groups.push_back(group_row("unseen", members([&](CategoryId c) {
    return status_is(c, Status::Unseen);
  })));
  rep.groups.push_back(group_row("known-thing", members([&](CategoryId c) {
    return status_is(c, Status::Known) && registry.is_thing(c);
  })));
  rep.groups.push_back(group_row("known-stuff", members([&](CategoryId c) {
    return status_is(c, Status::Known) && !registry.is_thing(c) && registry.contains(c);
  })));
  rep.groups.push_back(group_row("all", members([](CategoryId) { return true; })));
  return rep;
}

std::vector<ConsistencyDeviation> consistency_check(const std::vector<ConsistencyRow>& rows) {
  std::vector<ConsistencyDeviation> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const bool percent = r.pq > 1 || r.sq > 1 || r.rq > 1 || r.recall > 1 || r.precision > 1;
    const double scale = percent ? 100.0 : 1.0;
    ConsistencyDeviation d;
    d.pq_dev = std::abs(r.pq - r.sq * r.rq / scale);
    const double pr = r.precision + r.recall;
    const double f1 = pr > 0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    d.rq_dev = std::abs(r.rq - f1);
    out.push_back(d);
  }
  return out;
}

MatchStats evaluate_dataset(const std::vector<PanopticAnnotation>& gts,
                            const std::vector<PanopticAnnotation>& preds,
                            const CategoryRegistry& registry, int jobs,
                            const MatchOptions& opts) {
  std::unordered_map<ImageId, const PanopticAnnotation*> pred_by_id;
  for (const auto& p : preds) pred_by_id.emplace(p.image_id, &p);

  std::vector<MatchStats> per_image(gts.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= gts.size()) return;
      try {
        auto it = pred_by_id.find(gts[i].image_id);
        if (it == pred_by_id.end())
          throw DimensionMismatch(
              fmt::format("no prediction for image {}", gts[i].image_id));
        per_image[i] = match_image(gts[i], *it->second, registry, opts);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(gts.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  // Reduction in image order keeps results independent of thread scheduling.
  return accumulate(per_image);
}

CategoryRegistry collapsed_registry(const CategoryRegistry& registry) {
  std::vector<CategoryEntry> entries = registry.entries();
  entries.erase(std::remove_if(entries.begin(), entries.end(),
                               [](const CategoryEntry& e) {
                                 return e.status != Status::Known;
                               }),
                entries.end());
  entries.push_back({kUnknownCategoryId, "unknown", Kind::Thing, Status::Unknown});
  entries.push_back({kUnseenCategoryId, "unseen", Kind::Thing, Status::Unseen});
  return CategoryRegistry(std::move(entries));
}

PanopticAnnotation collapse_open_set(const PanopticAnnotation& ann,
                                     const CategoryRegistry& registry) {
  PanopticAnnotation out = ann;
  for (auto& s : out.segments) {
    switch (registry.status_of(s.category)) {
      case Status::Unknown:
        s.category = kUnknownCategoryId;
        break;
      case Status::Unseen:
        s.category = kUnseenCategoryId;
        break;
      case Status::Known:
        break;
    }
  }
  return out;
}

std::string format_report(const MetricReport& rep) {
  std::string out;
  out += fmt::format("{:<28}{:>8}{:>8}{:>8}{:>8}{:>8}{:>7}{:>7}{:>7}\n", "category", "PQ", "SQ",
                     "RQ", "R", "P", "TP", "FP", "FN");
  auto line = [&](const MetricRow& r) {
    out += fmt::format("{:<28}{:>8.1f}{:>8.1f}{:>8.1f}{:>8.1f}{:>8.1f}{:>7}{:>7}{:>7}\n",
                       r.label, 100 * r.pq, 100 * r.sq, 100 * r.rq, 100 * r.recall,
                       100 * r.precision, r.tp, r.fp, r.fn_);
  };
  for (const auto& r : rep.categories) line(r);
  out += fmt::format("{:-<96}\n", "");
  for (const auto& g : rep.groups) {
    if (g.n_categories == 0) continue;
    line(g);
  }
  return out;
}

}  // namespace opseval
