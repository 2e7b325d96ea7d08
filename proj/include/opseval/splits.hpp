#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "opseval/core_types.hpp"

namespace opseval {

struct InvalidRatio : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownCategory : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitResult {
  CategoryRegistry registry;
  std::set<CategoryId> removed_thing_ids;
  std::set<ImageId> dropped_image_ids;  // zero-shot only
};

// Full COCO 2017 panoptic vocabulary: 80 thing + 53 stuff categories, all known.
CategoryRegistry coco_registry();

// Marks the fixed cumulative unknown-class lists for K in {5,10,20}:
// 4, 8 or 16 of the 80 thing classes.
SplitResult make_split(int k_percent);

// Overrides the fixed lists with explicit class names (non-standard splits).
SplitResult make_split_from_names(const std::vector<std::string>& class_names);

// Deletes unknown/unseen segments and voids their pixels. Training-side only;
// evaluation annotations keep their open-set segments.
PanopticAnnotation apply_split(const PanopticAnnotation& ann, const SplitResult& split);

// Builds the zero-shot setting on top of the 5% split: the 16 tail thing
// classes become unseen and every image containing one of them is dropped.
SplitResult make_zero_shot(const std::vector<PanopticAnnotation>& anns,
                           const SplitResult& split5);

const std::vector<std::string>& zero_shot_tail_classes();

}  // namespace opseval
