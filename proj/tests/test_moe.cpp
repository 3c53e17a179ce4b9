#include <cmath>

#include <doctest.h>

#include "brainnet/errors.hpp"
#include "brainnet/gradcheck.hpp"
#include "brainnet/moe.hpp"
#include "test_helpers.hpp"

using namespace brainnet;
using namespace brainnet::testing;

TEST_CASE("gate_probs: anchors and softmax properties") {
  Rng rng(1);
  ExpertGroup group = make_expert_group(4, 8, 5, 3, rng);

  // zero gate -> uniform
  for (int i = 0; i < group.gate.weight.size(); ++i) group.gate.weight.data()[i] = 0.0;
  Tensor x = random_tensor({4}, rng, -1, 1, false);
  Tensor p = gate_probs(nullptr, group, x);
  for (int e = 0; e < 3; ++e) CHECK(p.at(e) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // bias (ln2, 0, 0) with zero weights -> (0.5, 0.25, 0.25)
  group.gate.bias.data()[0] = std::log(2.0);
  p = gate_probs(nullptr, group, x);
  CHECK(p.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at(2) == doctest::Approx(0.25).epsilon(1e-12));

  // sums to 1 for random inputs and parameters
  ExpertGroup g2 = make_expert_group(6, 8, 5, 4, rng);
  for (int rep = 0; rep < 25; ++rep) {
    Tensor xr = random_tensor({6}, rng, -2, 2, false);
    Tensor pr = gate_probs(nullptr, g2, xr);
    double sum = 0.0;
    for (int e = 0; e < 4; ++e) {
      CHECK(pr.at(e) > 0.0);
      sum += pr.at(e);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(gate_probs(nullptr, g2, random_tensor({5}, rng, -1, 1, false)),
                  ShapeError);
}

TEST_CASE("gate probabilities are shift invariant in the bias") {
  Rng rng(2);
  ExpertGroup group = make_expert_group(5, 8, 4, 3, rng);
  Tensor x = random_tensor({5}, rng, -1, 1, false);
  Tensor before = gate_probs(nullptr, group, x);
  for (int e = 0; e < 3; ++e) group.gate.bias.data()[e] += 7.25;
  Tensor after = gate_probs(nullptr, group, x);
  for (int e = 0; e < 3; ++e)
    CHECK(after.at(e) == doctest::Approx(before.at(e)).epsilon(1e-9));
}

TEST_CASE("moe_forward: degenerate and oracle cases") {
  Rng rng(3);

  // gate forced one-hot via huge bias selects that expert's output
  {
    ExpertGroup group = make_expert_group(4, 6, 3, 3, rng);
    group.gate.bias.data()[1] = 1e4;
    Tensor x = random_tensor({4}, rng, -1, 1, false);
    Tensor expected = expert_forward(nullptr, group.experts[1],
                                     Tensor::from({1, 4}, {x.at(0), x.at(1), x.at(2), x.at(3)}));
    Tensor got = moe_forward(nullptr, group, x);
    for (int j = 0; j < 3; ++j)
      CHECK(got.at(j) == doctest::Approx(expected.at(j)).epsilon(1e-6));
  }

  // identical experts make the mixture gate-independent
  {
    ExpertGroup group = make_expert_group(4, 6, 3, 2, rng);
    group.experts[1] = group.experts[0];
    Tensor x = random_tensor({4}, rng, -1, 1, false);
    Tensor expected = expert_forward(nullptr, group.experts[0],
                                     Tensor::from({1, 4}, {x.at(0), x.at(1), x.at(2), x.at(3)}));
    Tensor got = moe_forward(nullptr, group, x);
    for (int j = 0; j < 3; ++j)
      CHECK(got.at(j) == doctest::Approx(expected.at(j)).epsilon(1e-12));
  }

  // random 2-expert case equals p0*f0(x) + p1*f1(x) recombined independently
  {
    ExpertGroup group = make_expert_group(4, 6, 3, 2, rng);
    Tensor x = random_tensor({4}, rng, -1, 1, false);
    Tensor xr = Tensor::from({1, 4}, {x.at(0), x.at(1), x.at(2), x.at(3)});
    Tensor p = gate_probs(nullptr, group, x);
    Tensor f0 = expert_forward(nullptr, group.experts[0], xr);
    Tensor f1 = expert_forward(nullptr, group.experts[1], xr);
    Tensor got = moe_forward(nullptr, group, x);
    for (int j = 0; j < 3; ++j)
      CHECK(got.at(j) ==
            doctest::Approx(p.at(0) * f0.at(j) + p.at(1) * f1.at(j)).epsilon(1e-12));
  }
}

TEST_CASE("moe_forward stays in the experts' convex hull per coordinate") {
  Rng rng(4);
  ExpertGroup group = make_expert_group(5, 8, 4, 3, rng);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = random_tensor({5}, rng, -2, 2, false);
    Tensor xr = Tensor::from({1, 5}, std::vector<double>(x.data(), x.data() + 5));
    std::vector<Tensor> outs;
    for (const auto& e : group.experts) outs.push_back(expert_forward(nullptr, e, xr));
    Tensor got = moe_forward(nullptr, group, x);
    for (int j = 0; j < 4; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto& o : outs) {
        lo = std::min(lo, o.at(j));
        hi = std::max(hi, o.at(j));
      }
      CHECK(got.at(j) >= lo - 1e-12);
      CHECK(got.at(j) <= hi + 1e-12);
    }
  }
}

TEST_CASE("moe gradients flow through gate and experts") {
  Rng rng(5);
  ExpertGroup group = make_expert_group(4, 5, 3, 2, rng);
  Tensor x = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor w = fixed_weights({1, 3}, rng);
  std::vector<Tensor> params = {group.gate.weight,        group.gate.bias,
                                group.experts[0].fc1.weight, group.experts[0].fc1.bias,
                                group.experts[0].fc2.weight, group.experts[0].fc2.bias,
                                group.experts[1].fc1.weight, group.experts[1].fc2.weight};
  CHECK(grad_check([&](Tape* t) { return probe(t, moe_forward_all(t, group, x), w); },
                   params) < 1e-5);
}

TEST_CASE("with identical experts the gate receives zero gradient") {
  Rng rng(6);
  ExpertGroup group = make_expert_group(4, 5, 3, 2, rng);
  group.experts[1] = group.experts[0];
  Tensor x = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor w = fixed_weights({1, 3}, rng);

  group.gate.weight.zero_grad();
  group.gate.bias.zero_grad();
  Tape tape;
  Tensor loss = probe(&tape, moe_forward_all(&tape, group, x), w);
  tape.backward(loss);
  const double* gw = group.gate.weight.grad_data();
  const double* gb = group.gate.bias.grad_data();
  for (int i = 0; i < group.gate.weight.size(); ++i)
    CHECK(std::fabs(gw ? gw[i] : 0.0) < 1e-12);
  for (int i = 0; i < group.gate.bias.size(); ++i)
    CHECK(std::fabs(gb ? gb[i] : 0.0) < 1e-12);
  // grad_check agrees the mixture is flat in the gate: analytic is exactly 0,
  // numeric is pure cancellation noise against the 1e-8 denominator floor
  CHECK(grad_check([&](Tape* t) { return probe(t, moe_forward_all(t, group, x), w); },
                   {group.gate.weight, group.gate.bias}) < 1e-3);
}

TEST_CASE("gate trace records probability rows per group") {
  Rng rng(7);
  ExpertGroup group = make_expert_group(4, 5, 3, 3, rng);
  GateTrace trace;
  Tensor x = random_tensor({4}, rng, -1, 1, false);
  gate_probs(nullptr, group, x, &trace, 0);
  moe_forward(nullptr, group, x, &trace, 0);
  REQUIRE(trace.expert_probs.size() == 1);
  CHECK(trace.expert_probs[0].size() == 2);
  for (const auto& p : trace.expert_probs[0]) {
    double sum = 0.0;
    for (int e = 0; e < 3; ++e) {
      CHECK(p.at(e) >= 0.0);
      sum += p.at(e);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}
