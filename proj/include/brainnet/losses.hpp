#pragma once

#include <vector>

#include "brainnet/moe.hpp"
#include "brainnet/tensor.hpp"

namespace brainnet {

// Coefficients of the composite objective. When `learnable` is set, alpha,
// beta and gamma become live parameters stored pre-softplus so they stay
// positive; lambda is always fixed. entropy_sign flips the entropy term of
// the expert diversity loss (the printed form adds it).
struct LossWeights {
  double alpha = 0.1;
  double beta = 0.1;
  double gamma = 0.1;
  double lambda = 0.1;
  double entropy_sign = 1.0;
  bool learnable = false;
  Tensor alpha_raw, beta_raw, gamma_raw;  // defined iff learnable

  void validate() const;
  // Instantiates the raw parameters at softplus^{-1}(current values).
  void init_learnable();
  std::vector<Tensor> learnable_params() const;
  double alpha_value() const;
  double beta_value() const;
  double gamma_value() const;
};

// Per-step snapshot. total recombines from the parts exactly.
struct LossBreakdown {
  double cls = 0.0;
  double expert_diversity = 0.0;
  double disease_diversity = 0.0;
  double expert_balance = 0.0;
  double total = 0.0;
  // Effective coefficients used (softplus values when learnable).
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
};

// Shannon entropy of a probability vector, natural log, 0*log0 = 0.
// Requires entries >= 0 summing to 1 within 1e-6.
Tensor entropy(Tape* tape, const Tensor& p);

// Eq-style sum over groups of (1 - mean row std + sign*lambda * mean row
// entropy) of the traced gate distributions.
Tensor expert_diversity_loss(Tape* tape, const GateTrace& trace, double lambda,
                             double entropy_sign = 1.0);

// Inter-class centroid cosine sum minus mean sample-to-own-centroid cosine,
// over per-subject whole-brain representations.
Tensor disease_diversity_loss(Tape* tape, const Tensor& reps,
                              const std::vector<int>& labels, int n_classes);

// Closed-form 1-D optimal transport between distributions on {0..E-1}.
Tensor wasserstein1_discrete(Tape* tape, const Tensor& p, const Tensor& q);

// Mean over groups of W1(mean gate probability, uniform).
Tensor expert_balance_loss(Tape* tape, const GateTrace& trace);

// total = cls + alpha*e_d + beta*d_d + gamma*e_b. Fills `breakdown` with the
// scalar values actually combined.
Tensor total_loss(Tape* tape, const Tensor& cls, const Tensor& e_d,
                  const Tensor& d_d, const Tensor& e_b, const LossWeights& w,
                  LossBreakdown* breakdown = nullptr);

}  // namespace brainnet
