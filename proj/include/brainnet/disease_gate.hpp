#pragma once

#include <vector>

#include "brainnet/nn.hpp"
#include "brainnet/tensor.hpp"

namespace brainnet {

// Two-layer MLP mapping a sub-network vector to a probability vector over the
// K disease groups: sigmoid hidden layer, softmax output.
struct DiseaseGate {
  DenseLayer layer1;  // [H_g x N]
  DenseLayer layer2;  // [K x H_g]
};

DiseaseGate make_disease_gate(int in_dim, int hidden_dim, int n_groups,
                              Rng& rng);

// Batched: rows of x are sub-networks, output rows are probability vectors.
Tensor disease_weights_all(Tape* tape, const DiseaseGate& gate,
                           const Tensor& x);

// Single sub-network [N] -> [K].
Tensor disease_weights(Tape* tape, const DiseaseGate& gate, const Tensor& x);

// Convex combination of the K group representations under `weights`.
// weights: [R x K]; group_reps: K tensors of [R x D]. Single-vector callers
// pass R = 1.
Tensor disease_informed(Tape* tape, const Tensor& weights,
                        const std::vector<Tensor>& group_reps);

}  // namespace brainnet
