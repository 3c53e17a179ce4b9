#include "brainnet/losses.hpp"

#include <cmath>

#include "brainnet/errors.hpp"
#include "brainnet/ops.hpp"

namespace brainnet {

namespace {
// softplus^{-1}(y) = log(exp(y) - 1)
double inv_softplus(double y) {
  if (y <= 0.0) throw ValueError("learnable loss weights must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}
}  // namespace

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0 || lambda < 0.0)
    throw ValueError("loss weights must be nonnegative");
  if (entropy_sign != 1.0 && entropy_sign != -1.0)
    throw ValueError("entropy_sign must be +1 or -1");
}

void LossWeights::init_learnable() {
  alpha_raw = Tensor::scalar(inv_softplus(alpha));
  beta_raw = Tensor::scalar(inv_softplus(beta));
  gamma_raw = Tensor::scalar(inv_softplus(gamma));
  alpha_raw.set_requires_grad(true);
  beta_raw.set_requires_grad(true);
  gamma_raw.set_requires_grad(true);
}

std::vector<Tensor> LossWeights::learnable_params() const {
  if (!learnable) return {};
  return {alpha_raw, beta_raw, gamma_raw};
}

namespace {
double softplus_value(const Tensor& raw) {
  double v = raw.item();
  return v > 30.0 ? v : std::log1p(std::exp(v));
}
}  // namespace

double LossWeights::alpha_value() const {
  return learnable ? softplus_value(alpha_raw) : alpha;
}
double LossWeights::beta_value() const {
  return learnable ? softplus_value(beta_raw) : beta;
}
double LossWeights::gamma_value() const {
  return learnable ? softplus_value(gamma_raw) : gamma;
}

Tensor entropy(Tape* tape, const Tensor& p) {
  double sum = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p.at(i) < 0.0) throw ValueError("entropy: negative probability");
    sum += p.at(i);
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw ValueError("entropy: input does not sum to 1");
  Tensor rowp = p;
  if (p.rank() == 1)
    rowp = Tensor::from({1, p.size()},
                        std::vector<double>(p.data(), p.data() + p.size()));
  return mean_row_entropy(tape, rowp);
}

Tensor expert_diversity_loss(Tape* tape, const GateTrace& trace, double lambda,
                             double entropy_sign) {
  if (trace.expert_probs.empty())
    throw StateError("expert_diversity_loss: empty gate trace");
  Tensor total;
  for (const auto& group_probs : trace.expert_probs) {
    if (group_probs.empty())
      throw StateError("expert_diversity_loss: group with no traced gates");
    Tensor stacked = group_probs.size() == 1
                         ? group_probs[0]
                         : concat_rows(tape, group_probs);
    Tensor mean_std = mean_row_std(tape, stacked);
    Tensor mean_ent = mean_row_entropy(tape, stacked);
    // 1 - std + sign*lambda*H
    Tensor term = affine(tape, mean_std, -1.0, 1.0);
    term = add(tape, term, affine(tape, mean_ent, entropy_sign * lambda, 0.0));
    total = total.defined() ? add(tape, total, term) : term;
  }
  return total;
}

Tensor disease_diversity_loss(Tape* tape, const Tensor& reps,
                              const std::vector<int>& labels, int n_classes) {
  if (reps.rank() != 2 || reps.rows() < 1)
    throw ShapeError("disease_diversity_loss: reps must be a non-empty matrix");
  if (static_cast<int>(labels.size()) != reps.rows())
    throw ShapeError("disease_diversity_loss: labels do not match batch");
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes)
      throw ValueError("disease_diversity_loss: label out of range");
    count[static_cast<std::size_t>(l)]++;
  }
  Tensor centroids = class_centroids(tape, reps, labels, n_classes);

  Tensor pair_sum;
  for (int i = 0; i < n_classes; ++i) {
    if (count[static_cast<std::size_t>(i)] == 0) continue;
    for (int j = 0; j < n_classes; ++j) {
      if (j == i || count[static_cast<std::size_t>(j)] == 0) continue;
      Tensor c = cosine(tape, row(tape, centroids, i), row(tape, centroids, j));
      pair_sum = pair_sum.defined() ? add(tape, pair_sum, c) : c;
    }
  }

  int b = reps.rows();
  Tensor consistency;
  for (int s = 0; s < b; ++s) {
    Tensor c = cosine(tape, row(tape, reps, s),
                      row(tape, centroids, labels[static_cast<std::size_t>(s)]));
    consistency = consistency.defined() ? add(tape, consistency, c) : c;
  }
  consistency = affine(tape, consistency, 1.0 / b, 0.0);

  if (!pair_sum.defined()) return affine(tape, consistency, -1.0, 0.0);
  return sub(tape, pair_sum, consistency);
}

Tensor wasserstein1_discrete(Tape* tape, const Tensor& p, const Tensor& q) {
  return wasserstein1(tape, p, q);
}

Tensor expert_balance_loss(Tape* tape, const GateTrace& trace) {
  if (trace.expert_probs.empty())
    throw StateError("expert_balance_loss: empty gate trace");
  Tensor total;
  int n_groups = 0;
  for (const auto& group_probs : trace.expert_probs) {
    if (group_probs.empty())
      throw StateError("expert_balance_loss: group with no traced gates");
    Tensor stacked = group_probs.size() == 1
                         ? group_probs[0]
                         : concat_rows(tape, group_probs);
    Tensor emp = col_mean(tape, stacked);
    Tensor uniform = Tensor::full({1, emp.cols()}, 1.0 / emp.cols());
    Tensor w1 = wasserstein1(tape, emp, uniform);
    total = total.defined() ? add(tape, total, w1) : w1;
    ++n_groups;
  }
  return affine(tape, total, 1.0 / n_groups, 0.0);
}

Tensor total_loss(Tape* tape, const Tensor& cls, const Tensor& e_d,
                  const Tensor& d_d, const Tensor& e_b, const LossWeights& w,
                  LossBreakdown* breakdown) {
  w.validate();
  for (const Tensor* t : {&cls, &e_d, &d_d, &e_b})
    if (!t->all_finite())
      throw NumericalError("total_loss: non-finite loss component");

  Tensor total;
  if (w.learnable) {
    Tensor a = softplus(tape, w.alpha_raw);
    Tensor b = softplus(tape, w.beta_raw);
    Tensor g = softplus(tape, w.gamma_raw);
    total = add(tape, cls, mul(tape, a, e_d));
    total = add(tape, total, mul(tape, b, d_d));
    total = add(tape, total, mul(tape, g, e_b));
  } else {
    total = add(tape, cls, affine(tape, e_d, w.alpha, 0.0));
    total = add(tape, total, affine(tape, d_d, w.beta, 0.0));
    total = add(tape, total, affine(tape, e_b, w.gamma, 0.0));
  }
  if (breakdown) {
    breakdown->cls = cls.item();
    breakdown->expert_diversity = e_d.item();
    breakdown->disease_diversity = d_d.item();
    breakdown->expert_balance = e_b.item();
    breakdown->alpha = w.alpha_value();
    breakdown->beta = w.beta_value();
    breakdown->gamma = w.gamma_value();
    breakdown->total = total.item();
  }
  return total;
}

}  // namespace brainnet
