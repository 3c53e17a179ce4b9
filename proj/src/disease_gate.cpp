#include "brainnet/disease_gate.hpp"

#include "brainnet/errors.hpp"
#include "brainnet/ops.hpp"

namespace brainnet {

DiseaseGate make_disease_gate(int in_dim, int hidden_dim, int n_groups,
                              Rng& rng) {
  DiseaseGate g;
  g.layer1 = make_dense(in_dim, hidden_dim, rng);
  g.layer2 = make_dense(hidden_dim, n_groups, rng);
  return g;
}

Tensor disease_weights_all(Tape* tape, const DiseaseGate& gate,
                           const Tensor& x) {
  Tensor h = dense_forward(tape, gate.layer1, x);
  h = sigmoid(tape, h);
  Tensor logits = dense_forward(tape, gate.layer2, h);
  return softmax(tape, logits, 1);
}

Tensor disease_weights(Tape* tape, const DiseaseGate& gate, const Tensor& x) {
  Tensor xr = x;
  if (x.rank() == 1)
    xr = Tensor::from({1, x.size()},
                      std::vector<double>(x.data(), x.data() + x.size()));
  return disease_weights_all(tape, gate, xr);
}

Tensor disease_informed(Tape* tape, const Tensor& weights,
                        const std::vector<Tensor>& group_reps) {
  Tensor w = weights;
  if (w.rank() == 1)
    w = Tensor::from({1, w.size()},
                     std::vector<double>(w.data(), w.data() + w.size()));
  std::vector<Tensor> reps;
  reps.reserve(group_reps.size());
  for (const auto& r : group_reps) {
    if (r.rank() == 1)
      reps.push_back(Tensor::from(
          {1, r.size()}, std::vector<double>(r.data(), r.data() + r.size())));
    else
      reps.push_back(r);
  }
  return mixture(tape, w, reps);
}

}  // namespace brainnet
