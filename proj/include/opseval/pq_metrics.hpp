#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "opseval/core_types.hpp"

namespace opseval {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-category accumulator behind PQ/SQ/RQ. All fields merge by sum, so
// dataset aggregation is associative and commutative.
struct CategoryStats {
  long long tp = 0;
  long long fp = 0;
  long long fn_ = 0;
  double iou_sum = 0.0;
  // Presence counters: group means only average categories that appear.
  long long gt_segments = 0;
  long long pred_segments = 0;
};

struct MatchStats {
  std::map<CategoryId, CategoryStats> per_category;
};

struct MatchOptions {
  // Strict mode drops the inherited void/crowd conventions: plain IoU
  // denominator, no FP forgiveness, crowd segments scored like any other.
  bool strict = false;
};

MatchStats match_image(const PanopticAnnotation& gt, const PanopticAnnotation& pred,
                       const CategoryRegistry& registry, const MatchOptions& opts = {});

MatchStats accumulate(const std::vector<MatchStats>& stats);

struct MetricRow {
  std::string label;
  double pq = 0, sq = 0, rq = 0, recall = 0, precision = 0;
  long long tp = 0, fp = 0, fn_ = 0;
  int n_categories = 0;  // categories averaged into a group row; 1 for a category row
};

struct MetricReport {
  std::vector<MetricRow> categories;  // one row per category that appears
  std::vector<MetricRow> groups;      // known, unknown, unseen, known-thing, known-stuff, all

  const MetricRow* group(const std::string& label) const;
};

MetricReport report(const MatchStats& stats, const CategoryRegistry& registry);

// |pq - sq*rq| and |rq - F1(recall, precision)| per row; percent-scale input
// (any value > 1) is detected per row and deviations are reported in that scale.
struct ConsistencyRow {
  double pq = 0, sq = 0, rq = 0, recall = 0, precision = 0;
};
struct ConsistencyDeviation {
  double pq_dev = 0;
  double rq_dev = 0;
};
std::vector<ConsistencyDeviation> consistency_check(const std::vector<ConsistencyRow>& rows);

// Parallel per-image evaluation; gt and pred pair up by image_id and the
// reduction order is fixed by gt order, so --jobs never changes a digit.
MatchStats evaluate_dataset(const std::vector<PanopticAnnotation>& gts,
                            const std::vector<PanopticAnnotation>& preds,
                            const CategoryRegistry& registry, int jobs = 1,
                            const MatchOptions& opts = {});

// Registry with the reserved collapsed open-set categories appended.
CategoryRegistry collapsed_registry(const CategoryRegistry& registry);

// Relabels unknown-status categories to the reserved unknown category and
// unseen to the reserved unseen one; instances stay distinct segments.
PanopticAnnotation collapse_open_set(const PanopticAnnotation& ann,
                                     const CategoryRegistry& registry);

// Aligned plain-text table, values x100 with one decimal.
std::string format_report(const MetricReport& report);

}  // namespace opseval
