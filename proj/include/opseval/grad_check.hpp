#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opseval/heads_math.hpp"

namespace opseval {

// Central finite-difference verification of the four analytic gradients.
// Differences are evaluated at long-double precision with step 1e-5; the
// pseudo-label loss keeps every sample away from the confidence gate by a
// 1e-3 margin so the gate cannot flip under perturbation.

struct GradCheckConfig {
  std::uint64_t seed = 0;
  int trials = 100;
  int max_dim = 16;
  int max_batch = 32;
  int max_things = 5;
  double delta = 0.9;            // pseudo-label gate
  double boundary_margin = 1e-3; // min |sigmoid - delta| per void proposal
};

struct GradCheckReport {
  double max_rel_cls = 0;
  double max_rel_void_suppression = 0;
  double max_rel_objectiveness = 0;
  double max_rel_pseudo_obj = 0;

  double worst() const;
};

GradCheckReport run_grad_check(const GradCheckConfig& cfg);

// One random, role-balanced training batch plus matching head weights.
std::pair<HeadParams, TrainBatch> random_instance(std::uint64_t seed, int max_dim, int max_batch,
                                                  int max_things);

}  // namespace opseval
