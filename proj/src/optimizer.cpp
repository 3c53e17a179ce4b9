#include "brainnet/optimizer.hpp"

#include <cmath>

#include "brainnet/errors.hpp"

namespace brainnet {

void adamw_step(std::vector<Tensor>& params, OptimizerState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(static_cast<std::size_t>(params[p].size()), 0.0);
      state.v[p].assign(static_cast<std::size_t>(params[p].size()), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adamw_step: optimizer state does not match parameter list");

  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = params[p];
    int n = param.size();
    if (static_cast<int>(state.m[p].size()) != n)
      throw ShapeError("adamw_step: moment size does not match parameter size");
    const double* g = param.grad_data();
    double* w = param.data();
    double* m = state.m[p].data();
    double* v = state.v[p].data();
    for (int i = 0; i < n; ++i) {
      double gi = g ? g[i] : 0.0;
      if (!std::isfinite(gi))
        throw NumericalError("adamw_step: non-finite gradient");
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= state.lr * state.weight_decay * w[i];
      w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    param.zero_grad();
  }
}

}  // namespace brainnet
