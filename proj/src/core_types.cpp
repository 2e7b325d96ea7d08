#include "opseval/core_types.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>

namespace opseval {

double box_iou(const Box& a, const Box& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const double inter = static_cast<double>(x1 - x0) * (y1 - y0);
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

const SegmentInfo* PanopticAnnotation::find_segment(SegmentId id) const {
  for (const auto& s : segments)
    if (s.id == id) return &s;
  return nullptr;
}

CategoryRegistry::CategoryRegistry(std::vector<CategoryEntry> entries)
    : entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i) index_.emplace_back(entries_[i].id, i);
  std::sort(index_.begin(), index_.end());
}

const CategoryEntry* CategoryRegistry::find(CategoryId id) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), id,
                             [](const auto& p, CategoryId v) { return p.first < v; });
  if (it == index_.end() || it->first != id) return nullptr;
  return &entries_[it->second];
}

bool CategoryRegistry::is_thing(CategoryId id) const {
  const auto* e = find(id);
  return e != nullptr && e->kind == Kind::Thing;
}

Status CategoryRegistry::status_of(CategoryId id) const {
  const auto* e = find(id);
  return e != nullptr ? e->status : Status::Known;
}

std::vector<CategoryId> CategoryRegistry::ids_with_status(Status s) const {
  std::vector<CategoryId> out;
  for (const auto& e : entries_)
    if (e.status == s) out.push_back(e.id);
  return out;
}

std::optional<Box> tight_bbox(const SegmentMap& map, SegmentId id) {
  int min_x = map.width, min_y = map.height, max_x = -1, max_y = -1;
  for (int y = 0; y < map.height; ++y) {
    const SegmentId* row = map.ids.data() + static_cast<size_t>(y) * map.width;
    for (int x = 0; x < map.width; ++x) {
      if (row[x] != id) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return std::nullopt;
  return Box{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

std::vector<std::string> validate_annotation(const PanopticAnnotation& ann) {
  std::vector<std::string> violations;
  const auto& map = ann.map;

  if (map.ids.size() != static_cast<size_t>(map.width) * map.height) {
    violations.push_back(fmt::format("map size {} does not equal {}x{}", map.ids.size(),
                                     map.width, map.height));
    return violations;
  }

  std::unordered_map<SegmentId, long long> pixel_counts;
  for (SegmentId id : map.ids)
    if (id != kVoidId) ++pixel_counts[id];

  std::unordered_map<SegmentId, int> declared;
  for (const auto& s : ann.segments) {
    if (++declared[s.id] == 2)
      violations.push_back(fmt::format("segment id {} declared more than once", s.id));
    if (s.id == kVoidId) violations.push_back("segment id 0 is reserved for void");
    if (s.area <= 0) violations.push_back(fmt::format("segment {} has non-positive area", s.id));
  }

  for (const auto& s : ann.segments) {
    auto it = pixel_counts.find(s.id);
    const long long actual = it == pixel_counts.end() ? 0 : it->second;
    if (actual != s.area)
      violations.push_back(
          fmt::format("segment {}: declared area {} but map holds {} pixels", s.id, s.area, actual));
    auto bb = tight_bbox(map, s.id);
    if (bb && !(*bb == s.bbox))
      violations.push_back(fmt::format("segment {}: declared bbox ({},{},{},{}) but tight bbox is ({},{},{},{})",
                                       s.id, s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h, bb->x, bb->y,
                                       bb->w, bb->h));
  }

  for (const auto& [id, n] : pixel_counts) {
    if (ann.find_segment(id) == nullptr)
      violations.push_back(fmt::format("map contains id {} absent from segment list", id));
  }
  return violations;
}

}  // namespace opseval
