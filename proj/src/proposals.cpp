#include "opseval/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace opseval {

std::optional<Box> clip_box(const Box& box, int width, int height) {
  const int x0 = std::max(box.x, 0);
  const int y0 = std::max(box.y, 0);
  const int x1 = std::min(box.x + box.w, width);
  const int y1 = std::min(box.y + box.h, height);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

std::vector<Proposal> label_proposals(std::vector<Proposal> props,
                                      const PanopticAnnotation& gt,
                                      const CategoryRegistry& registry,
                                      const LabelOptions& opts) {
  struct Candidate {
    SegmentId id;
    CategoryId category;
    Box bbox;
  };
  std::vector<Candidate> known_things;
  for (const auto& s : gt.segments) {
    if (s.crowd) continue;
    if (registry.is_thing(s.category) && registry.status_of(s.category) == Status::Known)
      known_things.push_back({s.id, s.category, s.bbox});
  }
  std::sort(known_things.begin(), known_things.end(),
            [](const Candidate& a, const Candidate& b) { return a.id < b.id; });

  for (auto& p : props) {
    auto clipped = clip_box(p.box, gt.map.width, gt.map.height);
    if (!clipped) {
      p.role = Role::background();
      continue;
    }
    p.box = *clipped;

    double best_iou = 0.0;
    const Candidate* best = nullptr;
    for (const auto& c : known_things) {
      const double iou = box_iou(p.box, c.bbox);
      if (iou > best_iou) {  // candidates are id-sorted, so ties keep the smaller id
        best_iou = iou;
        best = &c;
      }
    }
    if (best != nullptr && best_iou >= opts.known_iou_threshold) {
      p.role = Role::known(best->category);
      continue;
    }

    long long void_pixels = 0;
    for (int y = p.box.y; y < p.box.y + p.box.h; ++y)
      for (int x = p.box.x; x < p.box.x + p.box.w; ++x)
        if (gt.map.at(x, y) == kVoidId) ++void_pixels;
    p.role = static_cast<double>(void_pixels) >= opts.void_fraction * p.box.area()
                 ? Role::void_()
                 : Role::background();
  }
  return props;
}

std::vector<Proposal> void_components(const PanopticAnnotation& gt) {
  const auto& map = gt.map;
  const int w = map.width, h = map.height;
  std::vector<std::int32_t> label(map.pixel_count(), -1);
  std::vector<Proposal> out;
  std::vector<std::int32_t> stack;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::int32_t start = y0 * w + x0;
      if (map.ids[start] != kVoidId || label[start] >= 0) continue;

      const std::int32_t comp = static_cast<std::int32_t>(out.size());
      int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
      label[start] = comp;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::int32_t cur = stack.back();
        stack.pop_back();
        const int cx = cur % w, cy = cur / w;
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        const int nx[4] = {cx - 1, cx + 1, cx, cx};
        const int ny[4] = {cy, cy, cy - 1, cy + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
          const std::int32_t n = ny[k] * w + nx[k];
          if (map.ids[n] == kVoidId && label[n] < 0) {
            label[n] = comp;
            stack.push_back(n);
          }
        }
      }
      Proposal p;
      p.box = Box{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
      p.role = Role::void_();
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::pair<std::vector<Proposal>, std::vector<Proposal>> pseudo_filter(
    const std::vector<Proposal>& props, double delta) {
  std::vector<Proposal> kept, dropped;
  for (const auto& p : props) {
    if (!p.scores || !p.scores->obj_logit)
      throw MissingScore("pseudo_filter requires an objectiveness logit on every proposal");
    const double sigma = 1.0 / (1.0 + std::exp(-*p.scores->obj_logit));
    (sigma >= delta ? kept : dropped).push_back(p);
  }
  return {std::move(kept), std::move(dropped)};
}

}  // namespace opseval
