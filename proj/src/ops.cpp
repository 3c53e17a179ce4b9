#include "brainnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "brainnet/errors.hpp"

namespace brainnet {

namespace {

void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw NumericalError(std::string(op) + ": non-finite value produced");
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() > 2) throw ShapeError(std::string(op) + ": rank > 2");
}

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// C += op(A) . op(B). Loop orders chosen per case for contiguous access;
// reduction order is fixed (deterministic).
void gemm_acc(double* c, const double* a, const double* b, bool ta, bool tb,
              int m, int n, int k) {
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<std::size_t>(i) * k;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<std::size_t>(i) * k;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<std::size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
        crow[j] += s;
      }
    }
  } else if (ta && !tb) {
    for (int p = 0; p < k; ++p) {
      const double* arow = a + static_cast<std::size_t>(p) * m;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        double av = arow[i];
        if (av == 0.0) continue;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<std::size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += a[static_cast<std::size_t>(p) * m + i] * brow[p];
        crow[j] += s;
      }
    }
  }
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.data()[i] = a.at(i) + b.at(i);
  check_finite(out, "add");
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([out, a = a, b = b]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (int i = 0; i < a.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (int i = 0; i < b.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.data()[i] = a.at(i) - b.at(i);
  check_finite(out, "sub");
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([out, a = a, b = b]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (int i = 0; i < a.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (int i = 0; i < b.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.data()[i] = a.at(i) * b.at(i);
  check_finite(out, "mul");
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record([out, a = a, b = b]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (int i = 0; i < a.size(); ++i) ga[i] += g[i] * b.at(i);
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (int i = 0; i < b.size(); ++i) gb[i] += g[i] * a.at(i);
      }
    });
  }
  return out;
}

Tensor affine(Tape* tape, const Tensor& x, double k, double m) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.data()[i] = k * x.at(i) + m;
  check_finite(out, "affine");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, k]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < x.size(); ++i) gx[i] += k * g[i];
    });
  }
  return out;
}

Tensor gelu(Tape* tape, const Tensor& x) {
  // tanh approximation: 0.5 x (1 + tanh(c (x + 0.044715 x^3)))
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a3 = 0.044715;
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    double v = x.at(i);
    double t = std::tanh(c * (v + a3 * v * v * v));
    out.data()[i] = 0.5 * v * (1.0 + t);
  }
  check_finite(out, "gelu");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < x.size(); ++i) {
        double v = x.at(i);
        double t = std::tanh(c * (v + a3 * v * v * v));
        double dt = (1.0 - t * t) * c * (1.0 + 3.0 * a3 * v * v);
        gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
      }
    });
  }
  return out;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    double v = x.at(i);
    out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  check_finite(out, "sigmoid");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < x.size(); ++i) {
        double s = out.at(i);
        gx[i] += g[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

Tensor softplus(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    double v = x.at(i);
    out.data()[i] = v > 30.0 ? v : std::log1p(std::exp(v));
  }
  check_finite(out, "softplus");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < x.size(); ++i) {
        double v = x.at(i);
        double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
        gx[i] += g[i] * s;
      }
    });
  }
  return out;
}

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b, bool trans_a,
              bool trans_b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  int m = trans_a ? a.cols() : a.rows();
  int ka = trans_a ? a.rows() : a.cols();
  int kb = trans_b ? b.cols() : b.rows();
  int n = trans_b ? b.rows() : b.cols();
  if (ka != kb) throw ShapeError("matmul: inner dimensions do not match");
  Tensor out = Tensor::zeros({m, n});
  gemm_acc(out.data(), a.data(), b.data(), trans_a, trans_b, m, n, ka);
  check_finite(out, "matmul");
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    int k = ka;
    tape->record([out, a = a, b = b, trans_a, trans_b, m, n, k]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (a.requires_grad()) {
        if (!trans_a)
          gemm_acc(a.grad(), g, b.data(), false, !trans_b, m, k, n);
        else
          gemm_acc(a.grad(), b.data(), g, trans_b, true, k, m, n);
      }
      if (b.requires_grad()) {
        if (!trans_b)
          gemm_acc(b.grad(), a.data(), g, !trans_a, false, k, n, m);
        else
          gemm_acc(b.grad(), g, a.data(), true, trans_a, n, k, m);
      }
    });
  }
  return out;
}

Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias) {
  require_rank2(x, "linear");
  if (weight.rank() != 2) throw ShapeError("linear: weight must be rank 2");
  int b = x.rows(), in = x.cols();
  int out_dim = weight.rows();
  if (weight.cols() != in)
    throw ShapeError("linear: weight inner dimension does not match input");
  if (bias.size() != out_dim)
    throw ShapeError("linear: bias length does not match output dimension");
  Tensor out = Tensor::zeros({b, out_dim});
  for (int i = 0; i < b; ++i) {
    const double* xrow = x.data() + static_cast<std::size_t>(i) * in;
    double* orow = out.data() + static_cast<std::size_t>(i) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      const double* wrow = weight.data() + static_cast<std::size_t>(o) * in;
      double s = bias.at(o);
      for (int j = 0; j < in; ++j) s += xrow[j] * wrow[j];
      orow[o] = s;
    }
  }
  check_finite(out, "linear");
  if (want_grad(tape, {&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, weight = weight, bias = bias, b, in, out_dim]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (x.requires_grad())
        gemm_acc(x.grad(), g, weight.data(), false, false, b, in, out_dim);
      if (weight.requires_grad())
        gemm_acc(weight.grad(), g, x.data(), true, false, out_dim, in, b);
      if (bias.requires_grad()) {
        double* gb = bias.grad();
        for (int i = 0; i < b; ++i)
          for (int o = 0; o < out_dim; ++o) gb[o] += g[i * out_dim + o];
      }
    });
  }
  return out;
}

Tensor softmax(Tape* tape, const Tensor& x, int axis) {
  require_rank2(x, "softmax");
  if (x.rank() == 1 && axis != 0)
    throw ShapeError("softmax: axis out of range for rank-1 tensor");
  if (x.rank() == 2 && axis != 0 && axis != 1)
    throw ShapeError("softmax: axis must be 0 or 1");
  int r = x.rows(), c = x.cols();
  bool by_rows = (x.rank() == 1) || (axis == 1);
  int n_slices = by_rows ? r : c;
  int slice_len = by_rows ? c : r;
  auto idx = [by_rows, c](int s, int j) { return by_rows ? s * c + j : j * c + s; };

  Tensor out = Tensor::zeros(x.shape());
  for (int s = 0; s < n_slices; ++s) {
    double mx = -1e300;
    for (int j = 0; j < slice_len; ++j) mx = std::max(mx, x.at(idx(s, j)));
    double sum = 0.0;
    for (int j = 0; j < slice_len; ++j) {
      double e = std::exp(x.at(idx(s, j)) - mx);
      out.data()[idx(s, j)] = e;
      sum += e;
    }
    for (int j = 0; j < slice_len; ++j) out.data()[idx(s, j)] /= sum;
  }
  check_finite(out, "softmax");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, n_slices, slice_len, idx]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int s = 0; s < n_slices; ++s) {
        double dot = 0.0;
        for (int j = 0; j < slice_len; ++j)
          dot += g[idx(s, j)] * out.at(idx(s, j));
        for (int j = 0; j < slice_len; ++j) {
          int i = idx(s, j);
          gx[i] += out.at(i) * (g[i] - dot);
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& scale,
                  const Tensor& shift, double eps) {
  require_rank2(x, "layer_norm");
  int r = x.rows(), c = x.cols();
  if (scale.size() != c || shift.size() != c)
    throw ShapeError("layer_norm: scale/shift length must equal row width");
  Tensor out = Tensor::zeros(x.shape());
  Tensor xhat = Tensor::zeros(x.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += x.at(i, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = x.at(i, j) - mu;
      var += d * d;
    }
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = inv;
    for (int j = 0; j < c; ++j) {
      double h = (x.at(i, j) - mu) * inv;
      xhat.at(i, j) = h;
      out.at(i, j) = scale.at(j) * h + shift.at(j);
    }
  }
  check_finite(out, "layer_norm");
  if (want_grad(tape, {&x, &scale, &shift})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, scale = scale, shift = shift, xhat, inv_std, r, c]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (scale.requires_grad()) {
        double* gs = scale.grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gs[j] += g[i * c + j] * xhat.at(i, j);
      }
      if (shift.requires_grad()) {
        double* gb = shift.grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gb[j] += g[i * c + j];
      }
      if (x.requires_grad()) {
        double* gx = x.grad();
        for (int i = 0; i < r; ++i) {
          double mean_dh = 0.0, mean_dh_xhat = 0.0;
          for (int j = 0; j < c; ++j) {
            double dh = g[i * c + j] * scale.at(j);
            mean_dh += dh;
            mean_dh_xhat += dh * xhat.at(i, j);
          }
          mean_dh /= c;
          mean_dh_xhat /= c;
          for (int j = 0; j < c; ++j) {
            double dh = g[i * c + j] * scale.at(j);
            gx[i * c + j] += inv_std[static_cast<std::size_t>(i)] *
                             (dh - mean_dh - xhat.at(i, j) * mean_dh_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape* tape, const Tensor& logits,
                     const std::vector<int>& labels) {
  require_rank2(logits, "cross_entropy");
  int b = logits.rows(), c = logits.cols();
  if (static_cast<int>(labels.size()) != b)
    throw ShapeError("cross_entropy: labels length must equal batch size");
  for (int i = 0; i < b; ++i)
    if (labels[static_cast<std::size_t>(i)] < 0 ||
        labels[static_cast<std::size_t>(i)] >= c)
      throw ValueError("cross_entropy: label out of range [0, C)");

  Tensor probs = Tensor::zeros({b, c});
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    double mx = -1e300;
    for (int j = 0; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(logits.at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) probs.at(i, j) /= sum;
    double lse = mx + std::log(sum);
    loss += lse - logits.at(i, labels[static_cast<std::size_t>(i)]);
  }
  Tensor out = Tensor::scalar(loss / b);
  check_finite(out, "cross_entropy");
  if (want_grad(tape, {&logits})) {
    out.set_requires_grad(true);
    tape->record([out, logits = logits, probs, labels, b, c]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gl = logits.grad();
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < c; ++j) {
          double p = probs.at(i, j);
          double y = (j == labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
          gl[i * c + j] += g[0] * (p - y) / b;
        }
    });
  }
  return out;
}

Tensor mean_all(Tape* tape, const Tensor& x) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += x.at(i);
  Tensor out = Tensor::scalar(s / x.size());
  check_finite(out, "mean_all");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      double v = g[0] / x.size();
      for (int i = 0; i < x.size(); ++i) gx[i] += v;
    });
  }
  return out;
}

Tensor sum_all(Tape* tape, const Tensor& x) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += x.at(i);
  Tensor out = Tensor::scalar(s);
  check_finite(out, "sum_all");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < x.size(); ++i) gx[i] += g[0];
    });
  }
  return out;
}

Tensor col_mean(Tape* tape, const Tensor& x) {
  require_rank2(x, "col_mean");
  int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({1, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(0, j) += x.at(i, j);
  for (int j = 0; j < c; ++j) out.at(0, j) /= r;
  check_finite(out, "col_mean");
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, r, c]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx[i * c + j] += g[j] / r;
    });
  }
  return out;
}

Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  int c = parts[0].cols();
  int total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
    total += p.rows();
  }
  Tensor out = Tensor::zeros({total, c});
  int off = 0;
  for (const auto& p : parts) {
    std::memcpy(out.data() + static_cast<std::size_t>(off) * c, p.data(),
                sizeof(double) * static_cast<std::size_t>(p.size()));
    off += p.rows();
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    out.set_requires_grad(true);
    tape->record([out, parts = parts, c]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      int off = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          double* gp = const_cast<Tensor&>(p).grad();
          for (int i = 0; i < p.size(); ++i)
            gp[i] += g[static_cast<std::size_t>(off) * c + i];
        }
        off += p.rows();
      }
    });
  }
  return out;
}

Tensor row(Tape* tape, const Tensor& x, int index) {
  require_rank2(x, "row");
  if (index < 0 || index >= x.rows()) throw ShapeError("row: index out of range");
  int c = x.cols();
  Tensor out = Tensor::zeros({1, c});
  std::memcpy(out.data(), x.data() + static_cast<std::size_t>(index) * c,
              sizeof(double) * static_cast<std::size_t>(c));
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, index, c]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      for (int j = 0; j < c; ++j) gx[index * c + j] += g[j];
    });
  }
  return out;
}

Tensor slice_cols(Tape* tape, const Tensor& x, int c0, int c1) {
  require_rank2(x, "slice_cols");
  if (c0 < 0 || c1 > x.cols() || c0 >= c1)
    throw ShapeError("slice_cols: bad column range");
  int r = x.rows(), w = c1 - c0;
  Tensor out = Tensor::zeros({r, w});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = x.at(i, c0 + j);
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record([out, x = x, c0, r, w]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gx = x.grad();
      int c = x.cols();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) gx[i * c + c0 + j] += g[i * w + j];
    });
  }
  return out;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  int r = parts[0].rows();
  int total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch");
    total += p.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  int off = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
    off += p.cols();
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    out.set_requires_grad(true);
    tape->record([out, parts = parts, r, total]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      int off = 0;
      for (auto& p : parts) {
        int pc = p.cols();
        if (p.requires_grad()) {
          double* gp = const_cast<Tensor&>(p).grad();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < pc; ++j)
              gp[i * pc + j] += g[i * total + off + j];
        }
        off += pc;
      }
    });
  }
  return out;
}

Tensor mixture(Tape* tape, const Tensor& weights,
               const std::vector<Tensor>& parts) {
  require_rank2(weights, "mixture");
  int r = weights.rows();
  int e = weights.cols();
  if (static_cast<int>(parts.size()) != e)
    throw ShapeError("mixture: weight width must equal number of parts");
  int d = parts[0].cols();
  for (const auto& p : parts) {
    require_rank2(p, "mixture");
    if (p.rows() != r || p.cols() != d)
      throw ShapeError("mixture: part shape mismatch");
  }
  Tensor out = Tensor::zeros({r, d});
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < e; ++k) {
      double w = weights.at(i, k);
      const double* prow = parts[static_cast<std::size_t>(k)].data() +
                           static_cast<std::size_t>(i) * d;
      double* orow = out.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) orow[j] += w * prow[j];
    }
  check_finite(out, "mixture");
  bool any = weights.requires_grad();
  for (const auto& p : parts) any = any || p.requires_grad();
  if (tape && any) {
    out.set_requires_grad(true);
    tape->record([out, weights = weights, parts = parts, r, e, d]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      for (int k = 0; k < e; ++k) {
        auto& p = const_cast<Tensor&>(parts[static_cast<std::size_t>(k)]);
        if (p.requires_grad()) {
          double* gp = p.grad();
          for (int i = 0; i < r; ++i) {
            double w = weights.at(i, k);
            for (int j = 0; j < d; ++j) gp[i * d + j] += w * g[i * d + j];
          }
        }
      }
      if (weights.requires_grad()) {
        double* gw = const_cast<Tensor&>(weights).grad();
        for (int i = 0; i < r; ++i)
          for (int k = 0; k < e; ++k) {
            const double* prow = parts[static_cast<std::size_t>(k)].data() +
                                 static_cast<std::size_t>(i) * d;
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += g[i * d + j] * prow[j];
            gw[i * e + k] += s;
          }
      }
    });
  }
  return out;
}

Tensor mean_row_std(Tape* tape, const Tensor& p) {
  require_rank2(p, "mean_row_std");
  int r = p.rows(), e = p.cols();
  std::vector<double> mu(static_cast<std::size_t>(r)), sd(static_cast<std::size_t>(r));
  double acc = 0.0;
  for (int i = 0; i < r; ++i) {
    double m = 0.0;
    for (int j = 0; j < e; ++j) m += p.at(i, j);
    m /= e;
    double v = 0.0;
    for (int j = 0; j < e; ++j) {
      double d = p.at(i, j) - m;
      v += d * d;
    }
    v /= e;
    mu[static_cast<std::size_t>(i)] = m;
    sd[static_cast<std::size_t>(i)] = std::sqrt(v);
    acc += sd[static_cast<std::size_t>(i)];
  }
  Tensor out = Tensor::scalar(acc / r);
  check_finite(out, "mean_row_std");
  if (want_grad(tape, {&p})) {
    out.set_requires_grad(true);
    tape->record([out, p = p, mu, sd, r, e]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gp = p.grad();
      for (int i = 0; i < r; ++i) {
        double s = sd[static_cast<std::size_t>(i)];
        if (s <= 0.0) continue;  // flat row: subgradient 0
        double scale = g[0] / (r * e * s);
        for (int j = 0; j < e; ++j)
          gp[i * e + j] += scale * (p.at(i, j) - mu[static_cast<std::size_t>(i)]);
      }
    });
  }
  return out;
}

Tensor mean_row_entropy(Tape* tape, const Tensor& p) {
  require_rank2(p, "mean_row_entropy");
  int r = p.rows(), e = p.cols();
  double acc = 0.0;
  for (int i = 0; i < r; ++i) {
    double h = 0.0;
    for (int j = 0; j < e; ++j) {
      double v = p.at(i, j);
      if (v < 0.0) throw ValueError("mean_row_entropy: negative probability");
      if (v > 0.0) h -= v * std::log(v);
    }
    acc += h;
  }
  Tensor out = Tensor::scalar(acc / r);
  check_finite(out, "mean_row_entropy");
  if (want_grad(tape, {&p})) {
    out.set_requires_grad(true);
    tape->record([out, p = p, r, e]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gp = p.grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < e; ++j) {
          double v = p.at(i, j);
          if (v > 0.0) gp[i * e + j] += g[0] * (-(std::log(v) + 1.0)) / r;
        }
    });
  }
  return out;
}

Tensor class_centroids(Tape* tape, const Tensor& reps,
                       const std::vector<int>& labels, int n_classes) {
  require_rank2(reps, "class_centroids");
  int b = reps.rows(), d = reps.cols();
  if (static_cast<int>(labels.size()) != b)
    throw ShapeError("class_centroids: labels length must equal batch size");
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  for (int s = 0; s < b; ++s) {
    int k = labels[static_cast<std::size_t>(s)];
    if (k < 0 || k >= n_classes)
      throw ValueError("class_centroids: label out of range");
    count[static_cast<std::size_t>(k)]++;
  }
  Tensor out = Tensor::zeros({n_classes, d});
  for (int s = 0; s < b; ++s) {
    int k = labels[static_cast<std::size_t>(s)];
    for (int j = 0; j < d; ++j) out.at(k, j) += reps.at(s, j);
  }
  for (int k = 0; k < n_classes; ++k)
    if (count[static_cast<std::size_t>(k)] > 0)
      for (int j = 0; j < d; ++j) out.at(k, j) /= count[static_cast<std::size_t>(k)];
  check_finite(out, "class_centroids");
  if (want_grad(tape, {&reps})) {
    out.set_requires_grad(true);
    tape->record([out, reps = reps, labels, count, b, d]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      double* gr = reps.grad();
      for (int s = 0; s < b; ++s) {
        int k = labels[static_cast<std::size_t>(s)];
        double inv = 1.0 / count[static_cast<std::size_t>(k)];
        for (int j = 0; j < d; ++j) gr[s * d + j] += g[k * d + j] * inv;
      }
    });
  }
  return out;
}

Tensor cosine(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  constexpr double floor = 1e-8;
  int n = a.size();
  double dot = 0.0, na2 = 0.0, nb2 = 0.0;
  for (int i = 0; i < n; ++i) {
    dot += a.at(i) * b.at(i);
    na2 += a.at(i) * a.at(i);
    nb2 += b.at(i) * b.at(i);
  }
  double na = std::max(std::sqrt(na2), floor);
  double nb = std::max(std::sqrt(nb2), floor);
  double c = dot / (na * nb);
  Tensor out = Tensor::scalar(c);
  check_finite(out, "cosine");
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    bool a_floored = std::sqrt(na2) < floor;
    bool b_floored = std::sqrt(nb2) < floor;
    tape->record([out, a = a, b = b, na, nb, c, n, a_floored, b_floored]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      if (a.requires_grad()) {
        double* ga = a.grad();
        for (int i = 0; i < n; ++i) {
          double d = b.at(i) / (na * nb);
          if (!a_floored) d -= c * a.at(i) / (na * na);
          ga[i] += g[0] * d;
        }
      }
      if (b.requires_grad()) {
        double* gb = b.grad();
        for (int i = 0; i < n; ++i) {
          double d = a.at(i) / (na * nb);
          if (!b_floored) d -= c * b.at(i) / (nb * nb);
          gb[i] += g[0] * d;
        }
      }
    });
  }
  return out;
}

Tensor wasserstein1(Tape* tape, const Tensor& p, const Tensor& q) {
  if (p.size() != q.size()) throw ShapeError("wasserstein1: length mismatch");
  int e = p.size();
  // CDF differences at indices 0..E-2; the final one is sum(p) - sum(q),
  // identically zero for distributions (and a kink we must not sit on).
  std::vector<double> diff(static_cast<std::size_t>(e), 0.0);
  double s = 0.0, w = 0.0;
  for (int j = 0; j + 1 < e; ++j) {
    s += p.at(j) - q.at(j);
    diff[static_cast<std::size_t>(j)] = s;
    w += std::abs(s);
  }
  Tensor out = Tensor::scalar(w);
  check_finite(out, "wasserstein1");
  if (want_grad(tape, {&p, &q})) {
    out.set_requires_grad(true);
    tape->record([out, p = p, q = q, diff, e]() mutable {
      const double* g = out.grad_data();
      if (!g) return;
      // dW/dp_j = sum_{m >= j, m <= E-2} sign(S_m); suffix scan.
      std::vector<double> suffix(static_cast<std::size_t>(e), 0.0);
      double acc = 0.0;
      for (int m = e - 2; m >= 0; --m) {
        double d = diff[static_cast<std::size_t>(m)];
        acc += (d > 0.0) - (d < 0.0);
        suffix[static_cast<std::size_t>(m)] = acc;
      }
      if (p.requires_grad()) {
        double* gp = p.grad();
        for (int j = 0; j < e; ++j) gp[j] += g[0] * suffix[static_cast<std::size_t>(j)];
      }
      if (q.requires_grad()) {
        double* gq = q.grad();
        for (int j = 0; j < e; ++j) gq[j] -= g[0] * suffix[static_cast<std::size_t>(j)];
      }
    });
  }
  return out;
}

Tensor attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                 int dim) {
  require_rank2(q, "attention");
  require_rank2(k, "attention");
  require_rank2(v, "attention");
  if (q.cols() != dim || k.cols() != dim || v.cols() != dim)
    throw ShapeError("attention: q/k/v width must equal dim");
  if (k.rows() != q.rows() || v.rows() != q.rows())
    throw ShapeError("attention: q/k/v must have the same sequence length");
  Tensor scores = matmul(tape, q, k, false, true);
  scores = affine(tape, scores, 1.0 / std::sqrt(static_cast<double>(dim)), 0.0);
  Tensor probs = softmax(tape, scores, 1);
  return matmul(tape, probs, v);
}

}  // namespace brainnet
