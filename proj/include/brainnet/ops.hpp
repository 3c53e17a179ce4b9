#pragma once

#include <vector>

#include "brainnet/tensor.hpp"

namespace brainnet {

// Differentiable tensor ops. Every op validates shapes, rejects non-finite
// outputs, and (when `tape` is non-null and an input requires grad) records a
// reverse-mode closure. Reduction order is fixed, so forward passes are
// deterministic given inputs.

// Elementwise, same shape.
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
// y = k*x + m with constant k, m.
Tensor affine(Tape* tape, const Tensor& x, double k, double m);

// Activations.
Tensor gelu(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor softplus(Tape* tape, const Tensor& x);

// y = op_a(a) . op_b(b), rank-2 operands.
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b,
              bool trans_a = false, bool trans_b = false);

// Fused y = x . W^T + b for x [B x in], W [out x in], b [out].
Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias);

// Max-subtracted softmax along `axis` (rank-2: 1 = rows, 0 = columns;
// rank-1: axis 0 over the whole vector).
Tensor softmax(Tape* tape, const Tensor& x, int axis);

// Row-wise layer norm with learned scale/shift.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& scale,
                  const Tensor& shift, double eps = 1e-5);

// Mean over batch of -log softmax(logits)[label].
Tensor cross_entropy(Tape* tape, const Tensor& logits,
                     const std::vector<int>& labels);

// Reductions / reshapes.
Tensor mean_all(Tape* tape, const Tensor& x);
Tensor sum_all(Tape* tape, const Tensor& x);
Tensor col_mean(Tape* tape, const Tensor& x);  // [R x C] -> [1 x C]
Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts);
Tensor row(Tape* tape, const Tensor& x, int index);        // -> [1 x C]
Tensor slice_cols(Tape* tape, const Tensor& x, int c0, int c1);
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts);

// y[i,:] = sum_e weights[i,e] * parts[e][i,:]  (dense mixture combination).
Tensor mixture(Tape* tape, const Tensor& weights,
               const std::vector<Tensor>& parts);

// Statistics over the rows of a matrix of probability vectors.
Tensor mean_row_std(Tape* tape, const Tensor& p);      // mean of per-row population std
Tensor mean_row_entropy(Tape* tape, const Tensor& p);  // mean of per-row Shannon entropy (nats)

// Per-class mean rows of `reps`; classes absent from the batch get zero rows.
Tensor class_centroids(Tape* tape, const Tensor& reps,
                       const std::vector<int>& labels, int n_classes);

// Cosine similarity of two vectors (or 1xD rows) with norm floor 1e-8.
Tensor cosine(Tape* tape, const Tensor& a, const Tensor& b);

// Wasserstein-1 between discrete distributions on {0..E-1} with unit spacing:
// the CDF-difference closed form. Differentiable in both arguments.
Tensor wasserstein1(Tape* tape, const Tensor& p, const Tensor& q);

// Scaled dot-product attention over an [S x d] sequence (one head).
Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 int dim);

}  // namespace brainnet
