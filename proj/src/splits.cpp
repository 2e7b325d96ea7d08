#include "opseval/splits.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>

namespace opseval {

namespace {

// Cumulative unknown-class lists for the 5/10/20% known-unknown splits.
const std::vector<std::string> kUnknown5 = {"car", "cow", "pizza", "toilet"};
const std::vector<std::string> kUnknown10 = {"boat", "tie", "zebra", "stop sign"};
const std::vector<std::string> kUnknown20 = {"dining table", "banana", "bicycle", "cake",
                                             "sink",         "cat",    "keyboard", "bear"};

const std::vector<std::string> kTailClasses = {
    "hair drier", "toaster",  "parking meter", "bear",         "scissors",  "microwave",
    "fire hydrant", "toothbrush", "stop sign", "mouse",        "refrigerator", "snowboard",
    "frisbee",    "keyboard", "hot dog",       "baseball bat"};

CategoryId id_by_name(const CategoryRegistry& reg, const std::string& name) {
  for (const auto& e : reg.entries())
    if (e.name == name) return e.id;
  throw UnknownCategory("no such category: " + name);
}

SplitResult mark_unknown(const std::vector<std::string>& names) {
  CategoryRegistry base = coco_registry();
  std::set<CategoryId> removed;
  for (const auto& n : names) {
    const CategoryId id = id_by_name(base, n);
    if (!base.is_thing(id))
      throw UnknownCategory("only thing classes can be removed: " + n);
    removed.insert(id);
  }
  std::vector<CategoryEntry> entries = base.entries();
  for (auto& e : entries)
    if (removed.count(e.id)) e.status = Status::Unknown;
  return SplitResult{CategoryRegistry(std::move(entries)), std::move(removed), {}};
}

}  // namespace

const std::vector<std::string>& zero_shot_tail_classes() { return kTailClasses; }

SplitResult make_split(int k_percent) {
  std::vector<std::string> names = kUnknown5;
  switch (k_percent) {
    case 5:
      break;
    case 10:
      names.insert(names.end(), kUnknown10.begin(), kUnknown10.end());
      break;
    case 20:
      names.insert(names.end(), kUnknown10.begin(), kUnknown10.end());
      names.insert(names.end(), kUnknown20.begin(), kUnknown20.end());
      break;
    default:
      throw InvalidRatio(fmt::format("K must be 5, 10 or 20 (got {})", k_percent));
  }
  return mark_unknown(names);
}

SplitResult make_split_from_names(const std::vector<std::string>& class_names) {
  return mark_unknown(class_names);
}

PanopticAnnotation apply_split(const PanopticAnnotation& ann, const SplitResult& split) {
  std::unordered_map<SegmentId, bool> drop;
  for (const auto& s : ann.segments) {
    const auto* entry = split.registry.find(s.category);
    if (entry == nullptr)
      throw UnknownCategory(
          fmt::format("segment {} has category {} absent from registry", s.id, s.category));
    drop[s.id] = entry->status != Status::Known;
  }

  PanopticAnnotation out;
  out.image_id = ann.image_id;
  out.map = ann.map;
  for (const auto& s : ann.segments)
    if (!drop[s.id]) out.segments.push_back(s);
  if (out.segments.size() != ann.segments.size()) {
    for (auto& id : out.map.ids)
      if (id != kVoidId && drop[id]) id = kVoidId;
  }
  return out;
}

SplitResult make_zero_shot(const std::vector<PanopticAnnotation>& anns,
                           const SplitResult& split5) {
  std::set<CategoryId> tail_ids;
  for (const auto& n : kTailClasses) tail_ids.insert(id_by_name(split5.registry, n));

  // unseen takes precedence over unknown where the lists overlap.
  std::vector<CategoryEntry> entries = split5.registry.entries();
  for (auto& e : entries)
    if (tail_ids.count(e.id)) e.status = Status::Unseen;

  SplitResult out;
  out.registry = CategoryRegistry(std::move(entries));
  out.removed_thing_ids = split5.removed_thing_ids;
  for (const auto& ann : anns) {
    const bool has_tail = std::any_of(ann.segments.begin(), ann.segments.end(),
                                      [&](const SegmentInfo& s) {
                                        // crowd segments of tail classes count as instances
                                        return tail_ids.count(s.category) > 0;
                                      });
    if (has_tail) out.dropped_image_ids.insert(ann.image_id);
  }
  return out;
}

}  // namespace opseval
