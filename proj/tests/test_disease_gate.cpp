#include <cmath>

#include <doctest.h>

#include "brainnet/disease_gate.hpp"
#include "brainnet/errors.hpp"
#include "brainnet/gradcheck.hpp"
#include "test_helpers.hpp"

using namespace brainnet;
using namespace brainnet::testing;

TEST_CASE("disease_weights: anchors and softmax properties") {
  Rng rng(1);
  DiseaseGate gate = make_disease_gate(5, 4, 3, rng);

  // all-zero parameters -> uniform over K
  for (Tensor* t : {&gate.layer1.weight, &gate.layer1.bias, &gate.layer2.weight,
                    &gate.layer2.bias})
    for (int i = 0; i < t->size(); ++i) t->data()[i] = 0.0;
  Tensor x = random_tensor({5}, rng, -1, 1, false);
  Tensor w = disease_weights(nullptr, gate, x);
  for (int k = 0; k < 3; ++k) CHECK(w.at(k) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // layer2 bias (ln2, 0, 0), zero layer2 weights -> (0.5, 0.25, 0.25)
  gate.layer2.bias.data()[0] = std::log(2.0);
  w = disease_weights(nullptr, gate, x);
  CHECK(w.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.at(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w.at(2) == doctest::Approx(0.25).epsilon(1e-12));

  // strictly positive, sums to 1 for any input
  DiseaseGate g2 = make_disease_gate(6, 8, 4, rng);
  for (int rep = 0; rep < 25; ++rep) {
    Tensor xr = random_tensor({6}, rng, -3, 3, false);
    Tensor wr = disease_weights(nullptr, g2, xr);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      CHECK(wr.at(k) > 0.0);
      sum += wr.at(k);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(disease_weights(nullptr, g2, random_tensor({5}, rng, -1, 1, false)),
                  ShapeError);
}

TEST_CASE("disease_weights shift-invariant in layer2 bias") {
  Rng rng(2);
  DiseaseGate gate = make_disease_gate(5, 4, 3, rng);
  Tensor x = random_tensor({5}, rng, -1, 1, false);
  Tensor before = disease_weights(nullptr, gate, x);
  for (int k = 0; k < 3; ++k) gate.layer2.bias.data()[k] += -3.5;
  Tensor after = disease_weights(nullptr, gate, x);
  for (int k = 0; k < 3; ++k)
    CHECK(after.at(k) == doctest::Approx(before.at(k)).epsilon(1e-9));
}

TEST_CASE("disease_informed: selection, convexity, oracle") {
  Rng rng(3);
  Tensor r0 = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor r1 = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor r2 = random_tensor({1, 4}, rng, -1, 1, false);

  // one-hot weights select a group's representation exactly
  Tensor onehot = Tensor::from({1, 3}, {1.0, 0.0, 0.0});
  Tensor sel = disease_informed(nullptr, onehot, {r0, r1, r2});
  for (int j = 0; j < 4; ++j) CHECK(sel.at(j) == r0.at(j));

  // all-equal representations are invariant to the weights
  Tensor wts = Tensor::from({1, 3}, {0.2, 0.5, 0.3});
  Tensor same = disease_informed(nullptr, wts, {r0, r0, r0});
  for (int j = 0; j < 4; ++j) CHECK(same.at(j) == doctest::Approx(r0.at(j)).epsilon(1e-12));

  // K=2 random case equals w0*r0 + w1*r1 by independent arithmetic
  Tensor w2 = Tensor::from({1, 2}, {0.7, 0.3});
  Tensor mix = disease_informed(nullptr, w2, {r0, r1});
  for (int j = 0; j < 4; ++j)
    CHECK(mix.at(j) == doctest::Approx(0.7 * r0.at(j) + 0.3 * r1.at(j)).epsilon(1e-12));

  // coordinatewise convex hull
  for (int j = 0; j < 4; ++j) {
    Tensor m = disease_informed(nullptr, wts, {r0, r1, r2});
    double lo = std::min({r0.at(j), r1.at(j), r2.at(j)});
    double hi = std::max({r0.at(j), r1.at(j), r2.at(j)});
    CHECK(m.at(j) >= lo - 1e-12);
    CHECK(m.at(j) <= hi + 1e-12);
  }

  CHECK_THROWS_AS(disease_informed(nullptr, wts, {r0, r1}), ShapeError);
}

TEST_CASE("disease gate parameters differentiate through the combination") {
  Rng rng(4);
  DiseaseGate gate = make_disease_gate(5, 4, 2, rng);
  Tensor x = random_tensor({1, 5}, rng, -1, 1, false);
  Tensor r0 = random_tensor({1, 3}, rng, -1, 1, false);
  Tensor r1 = random_tensor({1, 3}, rng, -1, 1, false);
  Tensor w = fixed_weights({1, 3}, rng);
  auto f = [&](Tape* t) {
    Tensor dw = disease_weights_all(t, gate, x);
    return probe(t, disease_informed(t, dw, {r0, r1}), w);
  };
  CHECK(grad_check(f, {gate.layer1.weight, gate.layer1.bias, gate.layer2.weight,
                       gate.layer2.bias}) < 1e-5);
}
