#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brainnet/tensor.hpp"

namespace brainnet {

struct GradCheckOptions {
  int min_coords = 100;   // sampled coordinates (all, if fewer exist)
  double step = 1e-5;     // central-difference half step
  std::uint64_t seed = 0x5eed;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  int n_checked = 0;
  std::string worst;  // "param#/index analytic=... numeric=..."
};

// Compares reverse-mode gradients of the scalar f(tape) against central
// finite differences over a random subsample of parameter coordinates, at
// least one per parameter tensor. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8). f must be deterministic and rebuild its
// graph on every call; params are perturbed in place and restored.
GradCheckReport grad_check_report(const std::function<Tensor(Tape*)>& f,
                                  const std::vector<Tensor>& params,
                                  GradCheckOptions opts = {});

double grad_check(const std::function<Tensor(Tape*)>& f,
                  const std::vector<Tensor>& params,
                  GradCheckOptions opts = {});

}  // namespace brainnet
