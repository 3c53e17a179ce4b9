#include "brainnet/moe.hpp"

#include "brainnet/errors.hpp"
#include "brainnet/ops.hpp"

namespace brainnet {

ExpertNetwork make_expert(int in_dim, int hidden_dim, int out_dim, Rng& rng) {
  ExpertNetwork e;
  e.fc1 = make_dense(in_dim, hidden_dim, rng);
  e.fc2 = make_dense(hidden_dim, out_dim, rng);
  return e;
}

ExpertGroup make_expert_group(int in_dim, int hidden_dim, int out_dim,
                              int n_experts, Rng& rng) {
  if (n_experts < 2) throw ShapeError("expert group needs at least 2 experts");
  ExpertGroup g;
  g.experts.reserve(static_cast<std::size_t>(n_experts));
  for (int e = 0; e < n_experts; ++e)
    g.experts.push_back(make_expert(in_dim, hidden_dim, out_dim, rng));
  g.gate = make_dense(in_dim, n_experts, rng);
  return g;
}

Tensor expert_forward(Tape* tape, const ExpertNetwork& expert,
                      const Tensor& x) {
  Tensor h = dense_forward(tape, expert.fc1, x);
  h = gelu(tape, h);
  return dense_forward(tape, expert.fc2, h);
}

Tensor gate_probs_all(Tape* tape, const ExpertGroup& group, const Tensor& x) {
  Tensor logits = dense_forward(tape, group.gate, x);
  return softmax(tape, logits, 1);
}

Tensor moe_forward_all(Tape* tape, const ExpertGroup& group, const Tensor& x,
                       Tensor* probs_out) {
  Tensor probs = gate_probs_all(tape, group, x);
  std::vector<Tensor> outputs;
  outputs.reserve(group.experts.size());
  for (const auto& expert : group.experts)
    outputs.push_back(expert_forward(tape, expert, x));
  if (probs_out) *probs_out = probs;
  return mixture(tape, probs, outputs);
}

namespace {
Tensor as_row(const Tensor& x) {
  if (x.rank() == 2 && x.rows() == 1) return x;
  if (x.rank() == 1) return Tensor::from({1, x.size()},
                                         std::vector<double>(x.data(), x.data() + x.size()));
  throw ShapeError("expected a single sub-network vector");
}
}  // namespace

Tensor gate_probs(Tape* tape, const ExpertGroup& group, const Tensor& x,
                  GateTrace* trace, int group_idx) {
  Tensor probs = gate_probs_all(tape, group, as_row(x));
  if (trace) {
    if (static_cast<int>(trace->expert_probs.size()) <= group_idx)
      trace->expert_probs.resize(static_cast<std::size_t>(group_idx) + 1);
    trace->expert_probs[static_cast<std::size_t>(group_idx)].push_back(probs);
  }
  return probs;
}

Tensor moe_forward(Tape* tape, const ExpertGroup& group, const Tensor& x,
                   GateTrace* trace, int group_idx) {
  Tensor probs;
  Tensor out = moe_forward_all(tape, group, as_row(x), &probs);
  if (trace) {
    if (static_cast<int>(trace->expert_probs.size()) <= group_idx)
      trace->expert_probs.resize(static_cast<std::size_t>(group_idx) + 1);
    trace->expert_probs[static_cast<std::size_t>(group_idx)].push_back(probs);
  }
  return out;
}

}  // namespace brainnet
