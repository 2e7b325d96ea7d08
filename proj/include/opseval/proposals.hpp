#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "opseval/core_types.hpp"

namespace opseval {

struct MissingScore : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RoleKind { Unassigned, Known, Void, Background };

struct Role {
  RoleKind kind = RoleKind::Unassigned;
  CategoryId category = 0;  // valid when kind == Known

  static Role known(CategoryId c) { return {RoleKind::Known, c}; }
  static Role void_() { return {RoleKind::Void, 0}; }
  static Role background() { return {RoleKind::Background, 0}; }
  bool operator==(const Role&) const = default;
};

struct ProposalScores {
  std::vector<double> class_logits;  // over thing classes then background
  std::optional<double> obj_logit;
};

struct Proposal {
  Box box;
  Role role;
  std::optional<std::vector<double>> feature;
  std::optional<ProposalScores> scores;
};

// Clips a box to the image bounds; returns nullopt when nothing remains.
std::optional<Box> clip_box(const Box& box, int width, int height);

struct LabelOptions {
  double known_iou_threshold = 0.5;   // box IoU against known-thing GT boxes
  double void_fraction = 0.5;         // fraction of box pixels on GT-void
};

// Assigns known(c) / void / background against training ground truth
// (open-set categories already voided). Highest-IoU known instance wins,
// ties broken by smaller segment id.
std::vector<Proposal> label_proposals(std::vector<Proposal> props,
                                      const PanopticAnnotation& gt,
                                      const CategoryRegistry& registry,
                                      const LabelOptions& opts = {});

// One void-role proposal per 4-connected component of void pixels, box set
// to the component's tight bounding box.
std::vector<Proposal> void_components(const PanopticAnnotation& gt);

// Keeps proposals with sigmoid(obj_logit) >= delta (boundary inclusive).
std::pair<std::vector<Proposal>, std::vector<Proposal>> pseudo_filter(
    const std::vector<Proposal>& props, double delta);

// JSON list-of-records serialization used by the CLI.
struct ProposalRecord {
  ImageId image_id = 0;
  Proposal proposal;
};

std::vector<ProposalRecord> read_proposals(const std::string& path);
void write_proposals(const std::vector<ProposalRecord>& records, const std::string& path);

}  // namespace opseval
