#include "brainnet/nn.hpp"

#include <cmath>

#include "brainnet/errors.hpp"

namespace brainnet {

DenseLayer make_dense(int in_dim, int out_dim, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0)
    throw ShapeError("make_dense: dimensions must be positive");
  DenseLayer layer;
  layer.weight = Tensor::zeros({out_dim, in_dim});
  layer.bias = Tensor::zeros({out_dim});
  double bound = std::sqrt(6.0 / (in_dim + out_dim));
  for (int i = 0; i < layer.weight.size(); ++i)
    layer.weight.data()[i] = rng.uniform(-bound, bound);
  layer.weight.set_requires_grad(true);
  layer.bias.set_requires_grad(true);
  return layer;
}

Tensor dense_forward(Tape* tape, const DenseLayer& layer, const Tensor& x) {
  return linear(tape, x, layer.weight, layer.bias);
}

TransformerLayer make_transformer_layer(int model_dim, int n_heads, Rng& rng) {
  if (model_dim <= 0) throw ShapeError("transformer: model_dim must be positive");
  if (n_heads <= 0 || model_dim % n_heads != 0)
    throw ShapeError("transformer: model_dim must be divisible by n_heads");
  TransformerLayer layer;
  layer.model_dim = model_dim;
  layer.n_heads = n_heads;
  layer.query = make_dense(model_dim, model_dim, rng);
  layer.key_weight = make_dense(model_dim, model_dim, rng).weight;
  layer.value = make_dense(model_dim, model_dim, rng);
  layer.output = make_dense(model_dim, model_dim, rng);
  layer.ff1 = make_dense(model_dim, 4 * model_dim, rng);
  layer.ff2 = make_dense(4 * model_dim, model_dim, rng);
  layer.ln1_scale = Tensor::full({model_dim}, 1.0);
  layer.ln1_shift = Tensor::zeros({model_dim});
  layer.ln2_scale = Tensor::full({model_dim}, 1.0);
  layer.ln2_shift = Tensor::zeros({model_dim});
  layer.ln1_scale.set_requires_grad(true);
  layer.ln1_shift.set_requires_grad(true);
  layer.ln2_scale.set_requires_grad(true);
  layer.ln2_shift.set_requires_grad(true);
  return layer;
}

Tensor transformer_forward(Tape* tape, const TransformerLayer& layer,
                           const Tensor& tokens) {
  if (tokens.cols() != layer.model_dim)
    throw ShapeError("transformer: token width does not match model_dim");
  Tensor normed = layer_norm(tape, tokens, layer.ln1_scale, layer.ln1_shift);
  Tensor q = dense_forward(tape, layer.query, normed);
  Tensor k = matmul(tape, normed, layer.key_weight, false, true);
  Tensor v = dense_forward(tape, layer.value, normed);

  Tensor attn;
  if (layer.n_heads == 1) {
    attn = attention(tape, q, k, v, layer.model_dim);
  } else {
    int head_dim = layer.model_dim / layer.n_heads;
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(layer.n_heads));
    for (int h = 0; h < layer.n_heads; ++h) {
      int c0 = h * head_dim;
      Tensor qh = slice_cols(tape, q, c0, c0 + head_dim);
      Tensor kh = slice_cols(tape, k, c0, c0 + head_dim);
      Tensor vh = slice_cols(tape, v, c0, c0 + head_dim);
      heads.push_back(attention(tape, qh, kh, vh, head_dim));
    }
    attn = concat_cols(tape, heads);
  }
  attn = dense_forward(tape, layer.output, attn);
  Tensor mid = add(tape, tokens, attn);

  Tensor normed2 = layer_norm(tape, mid, layer.ln2_scale, layer.ln2_shift);
  Tensor ff = dense_forward(tape, layer.ff1, normed2);
  ff = gelu(tape, ff);
  ff = dense_forward(tape, layer.ff2, ff);
  return add(tape, mid, ff);
}

}  // namespace brainnet
