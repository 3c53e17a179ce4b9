#include <cmath>

#include <doctest.h>

#include "brainnet/errors.hpp"
#include "brainnet/gradcheck.hpp"
#include "brainnet/ops.hpp"
#include "test_helpers.hpp"

using namespace brainnet;
using namespace brainnet::testing;

TEST_CASE("tensor basics and invariants") {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::scalar(1.0).at(0, 0) == 1.0 ? throw ShapeError("x") : 0,
                  ShapeError);  // scalar is rank-1

  Tensor shared = t;
  shared.at(0) = 42.0;
  CHECK(t.at(0) == 42.0);  // copies alias storage
  Tensor deep = t.clone();
  deep.at(0) = -1.0;
  CHECK(t.at(0) == 42.0);
}

TEST_CASE("elementwise ops: values and gradients") {
  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor w = fixed_weights({3, 4}, rng);

  Tensor s = add(nullptr, a, b);
  CHECK(s.at(1, 1) == doctest::Approx(a.at(1, 1) + b.at(1, 1)));
  CHECK_THROWS_AS(add(nullptr, a, Tensor::zeros({4, 3})), ShapeError);

  auto check = [&](auto f) {
    CHECK(grad_check(f, {a, b}) < 1e-6);
  };
  check([&](Tape* t) { return probe(t, add(t, a, b), w); });
  check([&](Tape* t) { return probe(t, sub(t, a, b), w); });
  check([&](Tape* t) { return probe(t, mul(t, a, b), w); });
  check([&](Tape* t) { return probe(t, affine(t, a, 2.5, -0.3), w); });
}

TEST_CASE("activations: values and gradients") {
  // gelu anchors
  Tensor z = Tensor::from({3}, {0.0, 10.0, -10.0});
  Tensor g = gelu(nullptr, z);
  CHECK(g.at(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.at(1) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(std::fabs(g.at(2)) < 1e-6);

  Rng rng(11);
  Tensor x = random_tensor({2, 5}, rng, -2.0, 2.0);
  Tensor w = fixed_weights({2, 5}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, gelu(t, x), w); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, sigmoid(t, x), w); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, softplus(t, x), w); }, {x}) < 1e-6);
}

TEST_CASE("matmul all transpose combinations") {
  Rng rng(13);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor at = random_tensor({4, 3}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  Tensor bt = random_tensor({5, 4}, rng);
  Tensor w = fixed_weights({3, 5}, rng);

  Tensor y = matmul(nullptr, a, b);
  double manual = 0.0;
  for (int k = 0; k < 4; ++k) manual += a.at(1, k) * b.at(k, 2);
  CHECK(y.at(1, 2) == doctest::Approx(manual).epsilon(1e-12));
  CHECK_THROWS_AS(matmul(nullptr, a, Tensor::zeros({3, 2})), ShapeError);

  CHECK(grad_check([&](Tape* t) { return probe(t, matmul(t, a, b, false, false), w); }, {a, b}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, matmul(t, at, b, true, false), w); }, {at, b}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, matmul(t, a, bt, false, true), w); }, {a, bt}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, matmul(t, at, bt, true, true), w); }, {at, bt}) < 1e-6);
}

TEST_CASE("linear matches x.W^T + b and differentiates") {
  Rng rng(17);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor weight = random_tensor({2, 3}, rng);
  Tensor bias = random_tensor({2}, rng);
  Tensor y = linear(nullptr, x, weight, bias);
  double manual = bias.at(1);
  for (int j = 0; j < 3; ++j) manual += x.at(2, j) * weight.at(1, j);
  CHECK(y.at(2, 1) == doctest::Approx(manual).epsilon(1e-12));

  Tensor w = fixed_weights({4, 2}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, linear(t, x, weight, bias), w); },
                   {x, weight, bias}) < 1e-6);
}

TEST_CASE("softmax: anchors, stability, properties, gradient") {
  Tensor u = softmax(nullptr, Tensor::from({3}, {0, 0, 0}), 0);
  for (int i = 0; i < 3; ++i) CHECK(u.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor v = softmax(nullptr, Tensor::from({3}, {std::log(2.0), 0, 0}), 0);
  CHECK(v.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.at(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(v.at(2) == doctest::Approx(0.25).epsilon(1e-12));

  Tensor big = softmax(nullptr, Tensor::from({2}, {1000.0, 0.0}), 0);
  CHECK(big.at(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(big.at(1) == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(19);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor x = random_tensor({4, 5}, rng, -30.0, 30.0, false);
    for (int axis : {0, 1}) {
      Tensor p = softmax(nullptr, x, axis);
      int slices = axis == 1 ? 4 : 5;
      int len = axis == 1 ? 5 : 4;
      for (int s = 0; s < slices; ++s) {
        double sum = 0.0;
        for (int j = 0; j < len; ++j) {
          double val = axis == 1 ? p.at(s, j) : p.at(j, s);
          CHECK(val > 0.0);
          sum += val;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
      }
    }
  }

  Tensor x = random_tensor({3, 4}, rng);
  Tensor w = fixed_weights({3, 4}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, softmax(t, x, 1), w); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, softmax(t, x, 0), w); }, {x}) < 1e-6);
}

TEST_CASE("layer_norm gradient") {
  Rng rng(23);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor scale = random_tensor({6}, rng, 0.5, 1.5);
  Tensor shift = random_tensor({6}, rng);
  Tensor w = fixed_weights({3, 6}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, layer_norm(t, x, scale, shift), w); },
                   {x, scale, shift}) < 2e-6);
}

TEST_CASE("cross_entropy: anchors and gradient") {
  Tensor uniform = Tensor::zeros({1, 3});
  CHECK(cross_entropy(nullptr, uniform, {1}).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-9));

  Tensor confident = Tensor::from({1, 3}, {0.0, 1000.0, 0.0});
  CHECK(cross_entropy(nullptr, confident, {1}).item() == doctest::Approx(0.0).epsilon(1e-9));

  // two-sample oracle computed by hand from per-sample -log p
  Tensor logits = Tensor::from({2, 3}, {1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
  auto nll = [&](int row, int label) {
    double mx = std::max({logits.at(row, 0), logits.at(row, 1), logits.at(row, 2)});
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += std::exp(logits.at(row, j) - mx);
    return mx + std::log(sum) - logits.at(row, label);
  };
  double expected = 0.5 * (nll(0, 1) + nll(1, 2));
  CHECK(cross_entropy(nullptr, logits, {1, 2}).item() == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(nullptr, logits, {1, 3}), ValueError);
  CHECK_THROWS_AS(cross_entropy(nullptr, logits, {1}), ShapeError);

  Rng rng(29);
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(grad_check([&](Tape* t) { return cross_entropy(t, x, {0, 2, 1, 1}); }, {x}) < 1e-6);
}

TEST_CASE("reductions and reshapes: gradients") {
  Rng rng(31);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor w1 = fixed_weights({1, 3}, rng);
  CHECK(grad_check([&](Tape* t) { return mean_all(t, x); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return sum_all(t, x); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, col_mean(t, x), w1); }, {x}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return probe(t, row(t, x, 2), w1); }, {x}) < 1e-6);

  Tensor y = random_tensor({2, 3}, rng);
  Tensor wc = fixed_weights({6, 3}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, concat_rows(t, {x, y}), wc); }, {x, y}) < 1e-6);

  Tensor ws = fixed_weights({4, 2}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, slice_cols(t, x, 1, 3), ws); }, {x}) < 1e-6);

  Tensor z = random_tensor({4, 2}, rng);
  Tensor wcc = fixed_weights({4, 5}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, concat_cols(t, {x, z}), wcc); }, {x, z}) < 1e-6);

  // round-trip: slicing the concat reproduces the parts
  Tensor cat = concat_cols(nullptr, {x, z});
  Tensor back = slice_cols(nullptr, cat, 3, 5);
  for (int i = 0; i < back.size(); ++i) CHECK(back.at(i) == z.at(i));
}

TEST_CASE("mixture combination: value oracle and gradient") {
  Rng rng(37);
  Tensor weights = random_prob_rows(3, 2, rng);
  Tensor p0 = random_tensor({3, 4}, rng);
  Tensor p1 = random_tensor({3, 4}, rng);
  Tensor y = mixture(nullptr, weights, {p0, p1});
  // independent scalar recombination
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(y.at(i, j) == doctest::Approx(weights.at(i, 0) * p0.at(i, j) +
                                          weights.at(i, 1) * p1.at(i, j))
                              .epsilon(1e-12));

  Tensor w = fixed_weights({3, 4}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, mixture(t, weights, {p0, p1}), w); },
                   {weights, p0, p1}) < 1e-6);
}

TEST_CASE("row statistics ops: values and gradients") {
  Rng rng(41);
  Tensor p = random_prob_rows(5, 3, rng);

  // hand-check one row's std and entropy
  double mu = (p.at(0, 0) + p.at(0, 1) + p.at(0, 2)) / 3.0;
  double var = 0.0;
  for (int j = 0; j < 3; ++j) var += (p.at(0, j) - mu) * (p.at(0, j) - mu);
  var /= 3.0;
  Tensor one_row = Tensor::from({1, 3}, {p.at(0, 0), p.at(0, 1), p.at(0, 2)});
  CHECK(mean_row_std(nullptr, one_row).item() == doctest::Approx(std::sqrt(var)).epsilon(1e-12));

  double h = 0.0;
  for (int j = 0; j < 3; ++j) h -= p.at(0, j) * std::log(p.at(0, j));
  CHECK(mean_row_entropy(nullptr, one_row).item() == doctest::Approx(h).epsilon(1e-12));

  CHECK(grad_check([&](Tape* t) { return mean_row_std(t, p); }, {p}) < 1e-6);
  CHECK(grad_check([&](Tape* t) { return mean_row_entropy(t, p); }, {p}) < 1e-6);
}

TEST_CASE("class_centroids and cosine: gradients") {
  Rng rng(43);
  Tensor reps = random_tensor({5, 4}, rng);
  std::vector<int> labels = {0, 1, 0, 2, 1};
  Tensor w = fixed_weights({3, 4}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, class_centroids(t, reps, labels, 3), w); },
                   {reps}) < 1e-6);

  Tensor a = random_tensor({4}, rng);
  Tensor b = random_tensor({4}, rng);
  CHECK(grad_check([&](Tape* t) { return cosine(t, a, b); }, {a, b}) < 1e-6);

  // orthogonal and identical anchors
  Tensor ex = Tensor::from({2}, {1.0, 0.0});
  Tensor ey = Tensor::from({2}, {0.0, 1.0});
  CHECK(cosine(nullptr, ex, ey).item() == doctest::Approx(0.0));
  CHECK(cosine(nullptr, ex, ex).item() == doctest::Approx(1.0));
  // zero vector hits the norm floor instead of dividing by zero
  Tensor zero = Tensor::zeros({2});
  CHECK(cosine(nullptr, zero, ex).item() == doctest::Approx(0.0));
}

TEST_CASE("wasserstein1: anchors, metric axioms, gradient") {
  Tensor p = Tensor::from({3}, {1.0, 0.0, 0.0});
  Tensor u = Tensor::from({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(wasserstein1(nullptr, p, u).item() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wasserstein1(nullptr, p, p).item() == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(47);
  for (int rep = 0; rep < 1000; ++rep) {
    Tensor a = random_prob_rows(1, 4, rng, false);
    Tensor b = random_prob_rows(1, 4, rng, false);
    Tensor c = random_prob_rows(1, 4, rng, false);
    double ab = wasserstein1(nullptr, a, b).item();
    double ba = wasserstein1(nullptr, b, a).item();
    double ac = wasserstein1(nullptr, a, c).item();
    double cb = wasserstein1(nullptr, c, b).item();
    CHECK(ab >= 0.0);
    CHECK(std::fabs(ab - ba) < 1e-9);           // symmetry
    CHECK(ab <= ac + cb + 1e-9);                // triangle inequality
    CHECK(wasserstein1(nullptr, a, a).item() < 1e-12);  // identity
  }

  Tensor pa = random_prob_rows(1, 5, rng);
  Tensor pb = random_prob_rows(1, 5, rng);
  CHECK(grad_check([&](Tape* t) { return wasserstein1(t, pa, pb); }, {pa, pb}) < 1e-6);
}

TEST_CASE("attention: anchors, convexity, gradient") {
  Rng rng(53);
  // single token: softmax over one key is 1, output equals v
  Tensor q1 = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor k1 = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor v1 = random_tensor({1, 4}, rng, -1, 1, false);
  Tensor o1 = attention(nullptr, q1, k1, v1, 4);
  for (int i = 0; i < 4; ++i) CHECK(o1.at(i) == doctest::Approx(v1.at(i)).epsilon(1e-12));

  // zero keys: uniform scores, output is the mean of v rows
  Tensor q2 = random_tensor({3, 2}, rng, -1, 1, false);
  Tensor k2 = Tensor::zeros({3, 2});
  Tensor v2 = random_tensor({3, 2}, rng, -1, 1, false);
  Tensor o2 = attention(nullptr, q2, k2, v2, 2);
  for (int j = 0; j < 2; ++j) {
    double mean = (v2.at(0, j) + v2.at(1, j) + v2.at(2, j)) / 3.0;
    for (int i = 0; i < 3; ++i) CHECK(o2.at(i, j) == doctest::Approx(mean).epsilon(1e-12));
  }

  // 2x2 case against a scalar brute-force oracle
  Tensor q = Tensor::from({2, 2}, {0.3, -0.7, 1.1, 0.4});
  Tensor k = Tensor::from({2, 2}, {0.5, 0.2, -0.3, 0.9});
  Tensor v = Tensor::from({2, 2}, {1.0, 2.0, -1.5, 0.25});
  Tensor o = attention(nullptr, q, k, v, 2);
  double scale = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 2; ++i) {
    double s0 = scale * (q.at(i, 0) * k.at(0, 0) + q.at(i, 1) * k.at(0, 1));
    double s1 = scale * (q.at(i, 0) * k.at(1, 0) + q.at(i, 1) * k.at(1, 1));
    double m = std::max(s0, s1);
    double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
    double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    for (int j = 0; j < 2; ++j)
      CHECK(o.at(i, j) == doctest::Approx(p0 * v.at(0, j) + p1 * v.at(1, j)).epsilon(1e-12));
  }

  // convex combination property: outputs stay inside the v column ranges
  for (int rep = 0; rep < 20; ++rep) {
    Tensor qq = random_tensor({4, 3}, rng, -2, 2, false);
    Tensor kk = random_tensor({4, 3}, rng, -2, 2, false);
    Tensor vv = random_tensor({4, 3}, rng, -2, 2, false);
    Tensor oo = attention(nullptr, qq, kk, vv, 3);
    for (int j = 0; j < 3; ++j) {
      double lo = 1e300, hi = -1e300;
      for (int i = 0; i < 4; ++i) {
        lo = std::min(lo, vv.at(i, j));
        hi = std::max(hi, vv.at(i, j));
      }
      for (int i = 0; i < 4; ++i) {
        CHECK(oo.at(i, j) >= lo - 1e-12);
        CHECK(oo.at(i, j) <= hi + 1e-12);
      }
    }
  }

  Tensor qa = random_tensor({3, 4}, rng);
  Tensor ka = random_tensor({3, 4}, rng);
  Tensor va = random_tensor({3, 4}, rng);
  Tensor w = fixed_weights({3, 4}, rng);
  CHECK(grad_check([&](Tape* t) { return probe(t, attention(t, qa, ka, va, 4), w); },
                   {qa, ka, va}) < 1e-6);
  CHECK_THROWS_AS(attention(nullptr, qa, ka, random_tensor({3, 5}, rng), 4), ShapeError);
}

TEST_CASE("non-finite inputs are rejected") {
  Tensor inf = Tensor::from({2}, {1.0, 1e308});
  CHECK_THROWS_AS(mul(nullptr, inf, inf), NumericalError);
}
