#include "opseval/grad_check.hpp"

#include <algorithm>
#include <random>

namespace opseval {

namespace {

using LongVec = std::vector<long double>;

LongVec widen(const std::vector<double>& v) { return LongVec(v.begin(), v.end()); }

double rel_err(double analytic, long double numeric) {
  const long double diff = std::abs(static_cast<long double>(analytic) - numeric);
  const long double scale = std::max<long double>(
      1.0L, std::max(std::abs(static_cast<long double>(analytic)), std::abs(numeric)));
  return static_cast<double>(diff / scale);
}

// Central difference of `value` along coordinate i of `params`.
template <typename ValueFn>
long double central_diff(LongVec params, size_t i, const ValueFn& value) {
  constexpr long double h = 1e-5L;
  params[i] += h;
  const long double up = value(params);
  params[i] -= 2 * h;
  const long double down = value(params);
  return (up - down) / (2 * h);
}

template <typename ValueFn>
double max_grad_err(const std::vector<double>& analytic_grad, const std::vector<double>& at,
                    const ValueFn& value) {
  double worst = 0;
  const LongVec wide = widen(at);
  for (size_t i = 0; i < analytic_grad.size(); ++i)
    worst = std::max(worst, rel_err(analytic_grad[i], central_diff(wide, i, value)));
  return worst;
}

}  // namespace

double GradCheckReport::worst() const {
  return std::max(std::max(max_rel_cls, max_rel_void_suppression),
                  std::max(max_rel_objectiveness, max_rel_pseudo_obj));
}

std::pair<HeadParams, TrainBatch> random_instance(std::uint64_t seed, int max_dim, int max_batch,
                                                  int max_things) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_dist(1, max_dim);
  std::uniform_int_distribution<int> batch_dist(4, std::max(4, max_batch));
  std::uniform_int_distribution<int> things_dist(1, max_things);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int dim = dim_dist(rng);
  const int n = batch_dist(rng);
  const int num_things = things_dist(rng);

  HeadParams params = HeadParams::zeros(num_things, dim);
  for (auto& w : params.class_weights) w = 0.5 * gauss(rng);
  for (auto& t : params.obj_weights) t = 0.5 * gauss(rng);

  TrainBatch batch;
  batch.dim = dim;
  std::uniform_int_distribution<int> role_dist(0, 2);
  std::uniform_int_distribution<int> index_dist(0, num_things - 1);
  for (int i = 0; i < n; ++i) {
    ProposalTarget t;
    // first three proposals pin one of each role so no loss sees an empty set
    const int role = i < 3 ? i : role_dist(rng);
    if (role == 0) t = ProposalTarget::thing(index_dist(rng));
    else if (role == 1) t = ProposalTarget::background();
    else t = ProposalTarget::void_();
    batch.targets.push_back(t);
    std::vector<double> f(dim);
    for (auto& v : f) v = gauss(rng);
    batch.features.push_back(std::move(f));
  }
  return {std::move(params), std::move(batch)};
}

GradCheckReport run_grad_check(const GradCheckConfig& cfg) {
  GradCheckReport report;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    auto [params, batch] = random_instance(cfg.seed * 1000003ull + trial, cfg.max_dim,
                                           cfg.max_batch, cfg.max_things);

    const auto cls = cls_loss(params, batch);
    report.max_rel_cls = std::max(
        report.max_rel_cls,
        max_grad_err(cls.grad, params.class_weights, [&](const LongVec& w) {
          return loss_value::cls<long double>(w, params.num_things, params.dim, batch);
        }));

    const auto supp = void_suppression_loss(params, batch);
    report.max_rel_void_suppression = std::max(
        report.max_rel_void_suppression,
        max_grad_err(supp.grad, params.class_weights, [&](const LongVec& w) {
          return loss_value::void_suppression<long double>(w, params.num_things, params.dim,
                                                           batch);
        }));

    const auto obj = objectiveness_loss(params, batch);
    report.max_rel_objectiveness = std::max(
        report.max_rel_objectiveness,
        max_grad_err(obj.grad, params.obj_weights, [&](const LongVec& theta) {
          return loss_value::objectiveness<long double>(theta, batch);
        }));

    // Keep every void proposal's confidence off the gate so the indicator
    // cannot flip inside the difference stencil.
    bool safe = false;
    for (int attempt = 0; attempt < 64 && !safe; ++attempt) {
      safe = true;
      for (size_t i = 0; i < batch.size(); ++i) {
        if (batch.targets[i].type != ProposalTarget::Type::Void) continue;
        const double s = loss_value::dot(params.obj_weights, batch.features[i]);
        const double sigma = 1.0 / (1.0 + std::exp(-s));
        if (std::abs(sigma - cfg.delta) < cfg.boundary_margin) {
          safe = false;
          for (auto& v : batch.features[i]) v *= 1.07;  // push away from the gate
          break;
        }
      }
    }
    const auto pseudo = pseudo_obj_loss(params, batch, cfg.delta);
    report.max_rel_pseudo_obj = std::max(
        report.max_rel_pseudo_obj,
        max_grad_err(pseudo.grad, params.obj_weights, [&](const LongVec& theta) {
          return loss_value::pseudo_obj<long double>(theta, batch, cfg.delta);
        }));
  }
  return report;
}

}  // namespace opseval
