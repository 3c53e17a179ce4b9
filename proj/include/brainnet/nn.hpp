#pragma once

#include "brainnet/ops.hpp"
#include "brainnet/rng.hpp"
#include "brainnet/tensor.hpp"

namespace brainnet {

// Affine layer y = x.W^T + b. Weights are Glorot-uniform, biases zero.
struct DenseLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  int in_dim() const { return weight.cols(); }
  int out_dim() const { return weight.rows(); }
};

DenseLayer make_dense(int in_dim, int out_dim, Rng& rng);

Tensor dense_forward(Tape* tape, const DenseLayer& layer, const Tensor& x);

// Pre-norm transformer encoder layer with residual connections around
// attention and feedforward; feedforward hidden width is 4 x model_dim.
// The key projection carries no bias: softmax shifts cancel a key bias
// exactly, leaving it a dead parameter.
struct TransformerLayer {
  DenseLayer query, value, output;
  Tensor key_weight;  // [model_dim x model_dim]
  DenseLayer ff1, ff2;
  Tensor ln1_scale, ln1_shift;
  Tensor ln2_scale, ln2_shift;
  int model_dim = 0;
  int n_heads = 1;
};

TransformerLayer make_transformer_layer(int model_dim, int n_heads, Rng& rng);

// tokens: [S x model_dim] -> [S x model_dim]
Tensor transformer_forward(Tape* tape, const TransformerLayer& layer,
                           const Tensor& tokens);

}  // namespace brainnet
