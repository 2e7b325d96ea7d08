#include "opseval/decision.hpp"

#include "opseval/pq_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace opseval {

std::optional<Strategy> strategy_from_string(const std::string& name) {
  if (name == "dual") return Strategy::Dual;
  if (name == "void-ignorance") return Strategy::VoidIgnorance;
  if (name == "void-background") return Strategy::VoidBackground;
  if (name == "void-suppression") return Strategy::VoidSuppression;
  if (name == "void-train") return Strategy::VoidTrain;
  if (name == "aux-gate") return Strategy::AuxGate;
  return std::nullopt;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Dual: return "dual";
    case Strategy::VoidIgnorance: return "void-ignorance";
    case Strategy::VoidBackground: return "void-background";
    case Strategy::VoidSuppression: return "void-suppression";
    case Strategy::VoidTrain: return "void-train";
    default: return "aux-gate";
  }
}

namespace {

std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0;
  for (size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::vector<Verdict> decide(const std::vector<Proposal>& props, const DecisionConfig& cfg) {
  const bool needs_aux = cfg.strategy == Strategy::VoidTrain || cfg.strategy == Strategy::AuxGate;
  if (needs_aux && !cfg.aux_index)
    throw MissingAuxIndex("strategy " + to_string(cfg.strategy) + " requires aux_index");

  std::vector<Verdict> out;
  out.reserve(props.size());
  for (const auto& prop : props) {
    if (!prop.scores || prop.scores->class_logits.empty())
      throw MissingScore("decide requires known-class logits on every proposal");
    const auto& logits = prop.scores->class_logits;
    // Layout: thing classes, then background, then any auxiliary class.
    // The auxiliary class (if configured) and the background both sit outside
    // the thing range used for rejection.
    int num_things = static_cast<int>(logits.size()) - 1;
    if (needs_aux) {
      if (*cfg.aux_index < 0 || *cfg.aux_index >= static_cast<int>(logits.size()))
        throw MissingAuxIndex(fmt::format("aux_index {} out of range", *cfg.aux_index));
      --num_things;
    }
    if (num_things < 1) throw MissingScore("proposal carries no thing-class logits");

    const auto p = softmax(logits);
    int best_thing = 0;
    for (int i = 1; i < num_things; ++i)
      if (p[i] > p[best_thing]) best_thing = i;
    const double m = p[best_thing];
    const bool rejected = m < cfg.tau_known;

    Verdict v;
    v.known_conf = m;
    if (prop.scores->obj_logit) v.obj_conf = sigmoid(*prop.scores->obj_logit);

    if (!rejected) {
      v.outcome = Outcome::Known;
      v.category = best_thing;
      out.push_back(v);
      continue;
    }
    switch (cfg.strategy) {
      case Strategy::Dual: {
        if (!prop.scores->obj_logit)
          throw MissingScore("dual strategy requires an objectiveness logit");
        v.outcome = *v.obj_conf >= cfg.tau_obj ? Outcome::Unknown : Outcome::Background;
        break;
      }
      case Strategy::VoidIgnorance:
      case Strategy::VoidBackground:
      case Strategy::VoidSuppression:
        // these differ only in training; test-time rejection alone decides
        v.outcome = Outcome::Unknown;
        break;
      case Strategy::VoidTrain:
      case Strategy::AuxGate: {
        const int arg = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        v.outcome = arg == *cfg.aux_index ? Outcome::Unknown : Outcome::Background;
        break;
      }
    }
    out.push_back(v);
  }
  return out;
}

PanopticAnnotation decisions_to_panoptic(int width, int height,
                                         const std::vector<Verdict>& verdicts,
                                         const std::vector<SegmentMap>& masks,
                                         const std::vector<CategoryId>& thing_categories,
                                         ImageId image_id) {
  if (verdicts.size() != masks.size())
    throw DimensionMismatch("one mask per verdict required");

  std::vector<size_t> order(verdicts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return verdicts[a].known_conf > verdicts[b].known_conf;
  });

  PanopticAnnotation out;
  out.image_id = image_id;
  out.map = SegmentMap(width, height);

  SegmentId next_id = 1;
  for (size_t idx : order) {
    const Verdict& v = verdicts[idx];
    if (v.outcome == Outcome::Background) continue;
    const SegmentMap& mask = masks[idx];
    if (mask.width != width || mask.height != height)
      throw DimensionMismatch(fmt::format("mask {} is {}x{}, image is {}x{}", idx, mask.width,
                                          mask.height, width, height));
    const SegmentId id = next_id++;
    long long painted = 0;
    for (size_t i = 0; i < mask.ids.size(); ++i) {
      if (mask.ids[i] != 0 && out.map.ids[i] == kVoidId) {
        out.map.ids[i] = id;
        ++painted;
      }
    }
    if (painted == 0) {
      --next_id;  // fully occluded; leave no empty segment behind
      continue;
    }
    SegmentInfo info;
    info.id = id;
    info.area = painted;
    info.bbox = *tight_bbox(out.map, id);
    info.category = v.outcome == Outcome::Unknown
                        ? kUnknownCategoryId
                        : thing_categories.at(static_cast<size_t>(v.category));
    out.segments.push_back(info);
  }
  return out;
}

PanopticAnnotation decisions_to_panoptic_boxes(int width, int height,
                                               const std::vector<Verdict>& verdicts,
                                               const std::vector<Proposal>& props,
                                               const std::vector<CategoryId>& thing_categories,
                                               ImageId image_id) {
  std::vector<SegmentMap> masks;
  masks.reserve(props.size());
  for (const auto& p : props) {
    SegmentMap m(width, height);
    const auto box = clip_box(p.box, width, height);
    if (box) {
      for (int y = box->y; y < box->y + box->h; ++y)
        for (int x = box->x; x < box->x + box->w; ++x) m.at(x, y) = 1;
    }
    masks.push_back(std::move(m));
  }
  return decisions_to_panoptic(width, height, verdicts, masks, thing_categories, image_id);
}

}  // namespace opseval
