#pragma once

#include <cstdint>
#include <vector>

#include "brainnet/tensor.hpp"

namespace brainnet {

// AdamW with decoupled weight decay: the decay shrinks weights directly and
// never enters the moment estimates.
struct OptimizerState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments, one entry per parameter
  std::vector<std::vector<double>> v;  // second moments
};

// One optimizer step over `params`, consuming their accumulated gradients
// (grads are zeroed afterwards). A parameter whose grad was never touched is
// treated as having zero gradient (weight decay still applies through lr).
void adamw_step(std::vector<Tensor>& params, OptimizerState& state);

}  // namespace brainnet
