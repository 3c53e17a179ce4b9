#pragma once

#include <vector>

#include "brainnet/nn.hpp"
#include "brainnet/tensor.hpp"

namespace brainnet {

// Two-layer GELU MLP encoding one sub-network into the shared latent space.
struct ExpertNetwork {
  DenseLayer fc1;  // [hidden x N]
  DenseLayer fc2;  // [out x hidden]
};

// E experts plus a softmax gate over them. The gate reads the raw sub-network
// vector, and every expert is active on every pass (dense mixture).
struct ExpertGroup {
  std::vector<ExpertNetwork> experts;
  DenseLayer gate;  // [E x N]
};

// Per-forward-pass record of gate distributions, consumed by the
// specialization losses and by relevance scoring. Tensors stay attached to
// the pass's tape, so losses computed from a trace receive gradients.
struct GateTrace {
  // expert_probs[group][subject] : [N x E]
  std::vector<std::vector<Tensor>> expert_probs;
  // disease_weights[subject] : [N x K]
  std::vector<Tensor> disease_weights;

  bool empty() const { return disease_weights.empty() && expert_probs.empty(); }
};

ExpertNetwork make_expert(int in_dim, int hidden_dim, int out_dim, Rng& rng);
ExpertGroup make_expert_group(int in_dim, int hidden_dim, int out_dim,
                              int n_experts, Rng& rng);

Tensor expert_forward(Tape* tape, const ExpertNetwork& expert, const Tensor& x);

// Gate distribution for a single sub-network vector [N] -> [E]. Appends the
// row to `trace` when given (group index `group_idx`).
Tensor gate_probs(Tape* tape, const ExpertGroup& group, const Tensor& x,
                  GateTrace* trace = nullptr, int group_idx = 0);

// Probability-weighted sum of all expert outputs for one sub-network [N]
// -> [out_dim]. Gradients flow into both the gate and the experts.
Tensor moe_forward(Tape* tape, const ExpertGroup& group, const Tensor& x,
                   GateTrace* trace = nullptr, int group_idx = 0);

// Batched versions over a whole subject: rows of x are sub-networks.
Tensor gate_probs_all(Tape* tape, const ExpertGroup& group, const Tensor& x);
Tensor moe_forward_all(Tape* tape, const ExpertGroup& group, const Tensor& x,
                       Tensor* probs_out = nullptr);

}  // namespace brainnet
