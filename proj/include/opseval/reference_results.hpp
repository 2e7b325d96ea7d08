#pragma once

#include <string>
#include <vector>

#include "opseval/pq_metrics.hpp"

namespace opseval {

struct ReferenceRow {
  std::string label;
  ConsistencyRow values;  // percent scale: PQ, SQ, RQ, recall, precision
};

// Published unknown-class results (percent scale) bundled for the built-in
// consistency check: PQ must equal SQ*RQ and RQ must equal F1(R, P) up to
// one-decimal rounding. Twelve rows: four methods at K = 5, 10, 20.
inline const std::vector<ReferenceRow>& reference_unknown_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"void-suppression K=5", {6.7, 76.2, 8.8, 39.9, 4.9}},
      {"void-train K=5", {8.6, 72.7, 11.8, 29.8, 7.3}},
      {"eopsn K=5", {23.1, 74.7, 30.9, 25.9, 38.3}},
      {"dual-decision K=5", {30.2, 80.0, 37.8, 32.8, 44.5}},
      {"void-suppression K=10", {6.5, 76.0, 8.6, 32.7, 5.0}},
      {"void-train K=10", {8.1, 72.6, 11.2, 25.7, 7.2}},
      {"eopsn K=10", {17.9, 76.8, 23.3, 19.0, 30.2}},
      {"dual-decision K=10", {24.5, 79.9, 30.7, 24.7, 40.6}},
      {"void-suppression K=20", {7.2, 75.3, 9.5, 27.6, 5.8}},
      {"void-train K=20", {7.5, 72.9, 10.3, 21.8, 6.7}},
      {"eopsn K=20", {11.3, 73.8, 15.3, 11.8, 21.9}},
      {"dual-decision K=20", {21.4, 79.1, 27.1, 21.9, 35.4}},
  };
  return rows;
}

}  // namespace opseval
