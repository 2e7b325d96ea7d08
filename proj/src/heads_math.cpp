#include "opseval/heads_math.hpp"

#include <algorithm>

namespace opseval {

namespace {

// Softmax of z, computed through the stable shifted form.
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

long long TrainBatch::count(ProposalTarget::Type t) const {
  long long n = 0;
  for (const auto& tgt : targets)
    if (tgt.type == t) ++n;
  return n;
}

LossResult cls_loss(const HeadParams& params, const TrainBatch& batch) {
  const int rows = params.num_things + 1;
  const int dim = params.dim;
  LossResult res;
  res.grad.assign(params.class_weights.size(), 0.0);

  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch.targets[i];
    if (t.type == ProposalTarget::Type::Void) continue;
    const int truth = t.type == ProposalTarget::Type::Thing ? t.thing_index : params.num_things;
    const auto& f = batch.features[i];
    auto z = loss_value::logits(params.class_weights, rows, dim, f);
    res.loss += loss_value::log_sum_exp(z) - z[truth];
    const auto p = softmax(z);
    for (int r = 0; r < rows; ++r) {
      const double coeff = p[r] - (r == truth ? 1.0 : 0.0);
      double* g = res.grad.data() + static_cast<size_t>(r) * dim;
      for (int d = 0; d < dim; ++d) g[d] += coeff * f[d];
    }
    ++n;
  }
  if (n == 0) throw EmptyBatch("cls_loss: no non-void proposals");
  res.loss /= static_cast<double>(n);
  for (double& g : res.grad) g /= static_cast<double>(n);
  return res;
}

LossResult void_suppression_loss(const HeadParams& params, const TrainBatch& batch) {
  const int rows = params.num_things + 1;
  const int dim = params.dim;
  LossResult res;
  res.grad.assign(params.class_weights.size(), 0.0);

  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch.targets[i].type != ProposalTarget::Type::Void) continue;
    const auto& f = batch.features[i];
    auto z = loss_value::logits(params.class_weights, rows, dim, f);
    const double log_z = loss_value::log_sum_exp(z);
    const auto p = softmax(z);

    // d(-log(1 - p_k))/dz_j = p_j - q_j where q is the softmax renormalized
    // over the rows other than k.
    std::vector<double> grad_z(rows, 0.0);
    for (int k = 0; k < params.num_things; ++k) {
      std::vector<double> rest;
      rest.reserve(rows - 1);
      for (int j = 0; j < rows; ++j)
        if (j != k) rest.push_back(z[j]);
      const double log_rest = loss_value::log_sum_exp(rest);
      res.loss += log_z - log_rest;
      for (int j = 0; j < rows; ++j)
        grad_z[j] += p[j] - (j == k ? 0.0 : std::exp(z[j] - log_rest));
    }
    for (int r = 0; r < rows; ++r) {
      double* g = res.grad.data() + static_cast<size_t>(r) * dim;
      for (int d = 0; d < dim; ++d) g[d] += grad_z[r] * f[d];
    }
    ++n;
  }
  if (n == 0) throw EmptyBatch("void_suppression_loss: no void proposals");
  res.loss /= static_cast<double>(n);
  for (double& g : res.grad) g /= static_cast<double>(n);
  return res;
}

LossResult objectiveness_loss(const HeadParams& params, const TrainBatch& batch) {
  LossResult res;
  res.grad.assign(params.obj_weights.size(), 0.0);

  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto type = batch.targets[i].type;
    if (type == ProposalTarget::Type::Void) continue;
    const auto& f = batch.features[i];
    const double s = loss_value::dot(params.obj_weights, f);
    const double sigma = sigmoid(s);
    double coeff;
    if (type == ProposalTarget::Type::Thing) {
      res.loss += loss_value::softplus(-s);
      coeff = sigma - 1.0;
    } else {
      res.loss += loss_value::softplus(s);
      coeff = sigma;
    }
    for (int d = 0; d < params.dim; ++d) res.grad[d] += coeff * f[d];
    ++n;
  }
  if (n == 0) throw EmptyBatch("objectiveness_loss: no non-void proposals");
  res.loss /= static_cast<double>(n);
  for (double& g : res.grad) g /= static_cast<double>(n);
  return res;
}

LossResult pseudo_obj_loss(const HeadParams& params, const TrainBatch& batch, double delta) {
  LossResult res;
  res.grad.assign(params.obj_weights.size(), 0.0);

  long long n_void = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch.targets[i].type != ProposalTarget::Type::Void) continue;
    ++n_void;
    const auto& f = batch.features[i];
    const double s = loss_value::dot(params.obj_weights, f);
    const double sigma = sigmoid(s);
    if (sigma < delta) continue;  // gate is a stop-gradient
    ++res.kept;
    res.loss += loss_value::softplus(-s);
    for (int d = 0; d < params.dim; ++d) res.grad[d] += (sigma - 1.0) * f[d];
  }
  if (n_void == 0) throw EmptyBatch("pseudo_obj_loss: no void proposals");
  // normalized by the full void count, filtered proposals included
  res.loss /= static_cast<double>(n_void);
  for (double& g : res.grad) g /= static_cast<double>(n_void);
  return res;
}

}  // namespace opseval
