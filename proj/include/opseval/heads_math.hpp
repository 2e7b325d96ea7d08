#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace opseval {

struct EmptyBatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Classification head weights W ((num_things+1) x dim, background last) and
// objectiveness head weights theta (dim).
struct HeadParams {
  int num_things = 0;
  int dim = 0;
  std::vector<double> class_weights;  // row-major
  std::vector<double> obj_weights;

  static HeadParams zeros(int num_things, int dim) {
    HeadParams p;
    p.num_things = num_things;
    p.dim = dim;
    p.class_weights.assign(static_cast<size_t>(num_things + 1) * dim, 0.0);
    p.obj_weights.assign(dim, 0.0);
    return p;
  }
};

struct ProposalTarget {
  enum class Type { Thing, Void, Background };
  Type type = Type::Background;
  int thing_index = -1;  // valid for Type::Thing

  static ProposalTarget thing(int index) { return {Type::Thing, index}; }
  static ProposalTarget void_() { return {Type::Void, -1}; }
  static ProposalTarget background() { return {Type::Background, -1}; }
};

struct TrainBatch {
  int dim = 0;
  std::vector<std::vector<double>> features;
  std::vector<ProposalTarget> targets;

  size_t size() const { return features.size(); }
  long long count(ProposalTarget::Type t) const;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // layout matches the differentiated parameter
  long long kept = 0;        // pseudo-label losses only
};

// Mean cross entropy over non-void proposals, softmax over things+background.
LossResult cls_loss(const HeadParams& params, const TrainBatch& batch);

// Mean over void proposals of -sum_k log(1 - softmax_k) over thing classes.
LossResult void_suppression_loss(const HeadParams& params, const TrainBatch& batch);

// Binary logistic loss of the objectiveness head: things positive, background
// negative, void excluded; normalized by the non-void count.
LossResult objectiveness_loss(const HeadParams& params, const TrainBatch& batch);

// Pseudo-label objectiveness loss: -log sigmoid over void proposals passing
// the confidence gate sigmoid >= delta; the gate is a stop-gradient and the
// normalizer is the total void count.
LossResult pseudo_obj_loss(const HeadParams& params, const TrainBatch& batch, double delta);

// Value-only evaluation at arbitrary precision; the finite-difference oracle
// instantiates these with long double.
namespace loss_value {

template <typename Real>
Real log_sum_exp(const std::vector<Real>& z) {
  Real m = z[0];
  for (Real v : z) m = std::max(m, v);
  Real s = 0;
  for (Real v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// log(1 + e^x), overflow-safe
template <typename Real>
Real softplus(Real x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Real>
std::vector<Real> logits(const std::vector<Real>& w, int num_rows, int dim,
                         const std::vector<double>& f) {
  std::vector<Real> z(num_rows, Real(0));
  for (int r = 0; r < num_rows; ++r) {
    Real s = 0;
    for (int d = 0; d < dim; ++d) s += w[static_cast<size_t>(r) * dim + d] * Real(f[d]);
    z[r] = s;
  }
  return z;
}

template <typename Real>
Real dot(const std::vector<Real>& theta, const std::vector<double>& f) {
  Real s = 0;
  for (size_t d = 0; d < theta.size(); ++d) s += theta[d] * Real(f[d]);
  return s;
}

template <typename Real>
Real cls(const std::vector<Real>& w, int num_things, int dim, const TrainBatch& batch) {
  const int rows = num_things + 1;
  Real total = 0;
  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch.targets[i];
    if (t.type == ProposalTarget::Type::Void) continue;
    const int truth = t.type == ProposalTarget::Type::Thing ? t.thing_index : num_things;
    auto z = logits(w, rows, dim, batch.features[i]);
    total += log_sum_exp(z) - z[truth];
    ++n;
  }
  if (n == 0) throw EmptyBatch("cls_loss: no non-void proposals");
  return total / Real(n);
}

template <typename Real>
Real void_suppression(const std::vector<Real>& w, int num_things, int dim,
                      const TrainBatch& batch) {
  const int rows = num_things + 1;
  Real total = 0;
  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch.targets[i].type != ProposalTarget::Type::Void) continue;
    auto z = logits(w, rows, dim, batch.features[i]);
    const Real log_z = log_sum_exp(z);
    for (int k = 0; k < num_things; ++k) {
      // log(1 - softmax_k) = lse(z without k) - lse(z)
      std::vector<Real> rest;
      rest.reserve(rows - 1);
      for (int j = 0; j < rows; ++j)
        if (j != k) rest.push_back(z[j]);
      total += log_z - log_sum_exp(rest);
    }
    ++n;
  }
  if (n == 0) throw EmptyBatch("void_suppression_loss: no void proposals");
  return total / Real(n);
}

template <typename Real>
Real objectiveness(const std::vector<Real>& theta, const TrainBatch& batch) {
  Real total = 0;
  long long n = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto type = batch.targets[i].type;
    if (type == ProposalTarget::Type::Void) continue;
    const Real s = dot(theta, batch.features[i]);
    total += type == ProposalTarget::Type::Thing ? softplus(-s) : softplus(s);
    ++n;
  }
  if (n == 0) throw EmptyBatch("objectiveness_loss: no non-void proposals");
  return total / Real(n);
}

template <typename Real>
Real pseudo_obj(const std::vector<Real>& theta, const TrainBatch& batch, double delta) {
  Real total = 0;
  long long n_void = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch.targets[i].type != ProposalTarget::Type::Void) continue;
    ++n_void;
    const Real s = dot(theta, batch.features[i]);
    const Real sigma = Real(1) / (Real(1) + std::exp(-s));
    if (sigma >= Real(delta)) total += softplus(-s);
  }
  if (n_void == 0) throw EmptyBatch("pseudo_obj_loss: no void proposals");
  return total / Real(n_void);
}

}  // namespace loss_value

}  // namespace opseval
