#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opseval/core_types.hpp"
#include "opseval/proposals.hpp"

namespace opseval {

struct MissingAuxIndex : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Strategy {
  Dual,
  VoidIgnorance,
  VoidBackground,
  VoidSuppression,
  VoidTrain,
  AuxGate,
};

std::optional<Strategy> strategy_from_string(const std::string& name);
std::string to_string(Strategy s);

struct DecisionConfig {
  Strategy strategy = Strategy::Dual;
  double tau_known = 0.5;
  double tau_obj = 0.5;
  // Index of the auxiliary ("void" / exemplar) class inside class_logits;
  // required for VoidTrain and AuxGate.
  std::optional<int> aux_index;
};

enum class Outcome { Known, Unknown, Background };

struct Verdict {
  Outcome outcome = Outcome::Background;
  CategoryId category = 0;  // valid for Outcome::Known (index into thing classes)
  double known_conf = 0.0;  // max thing-class softmax probability
  std::optional<double> obj_conf;
};

// Applies the configured open-set inference rule to each proposal's scores.
// Rejection means max thing-class softmax probability < tau_known with
// background (and any auxiliary class) in the denominator.
std::vector<Verdict> decide(const std::vector<Proposal>& props, const DecisionConfig& cfg);

// Paints per-proposal masks into a panoptic map, higher known_conf first
// (painted pixels are never overwritten). Unknown verdicts receive the
// reserved unknown category; Background verdicts stay void. `categories`
// maps a Known verdict's thing index to a category id.
PanopticAnnotation decisions_to_panoptic(int width, int height,
                                         const std::vector<Verdict>& verdicts,
                                         const std::vector<SegmentMap>& masks,
                                         const std::vector<CategoryId>& thing_categories,
                                         ImageId image_id = 0);

// Convenience: rectangular masks filled from the proposals' boxes.
PanopticAnnotation decisions_to_panoptic_boxes(int width, int height,
                                               const std::vector<Verdict>& verdicts,
                                               const std::vector<Proposal>& props,
                                               const std::vector<CategoryId>& thing_categories,
                                               ImageId image_id = 0);

}  // namespace opseval
