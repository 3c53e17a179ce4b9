#include "brainnet/tensor.hpp"

#include <cmath>
#include <cstddef>

#include "brainnet/errors.hpp"

namespace brainnet {

namespace {
int shape_size(const std::vector<int>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  return static_cast<int>(n);
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  auto s = std::make_shared<Storage>();
  int n = shape_size(shape);
  s->shape = std::move(shape);
  s->data.assign(static_cast<std::size_t>(n), 0.0);
  return Tensor(std::move(s));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t.data()[i] = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  int n = shape_size(shape);
  if (static_cast<std::size_t>(n) != data.size())
    throw ShapeError("tensor data length does not match shape");
  auto s = std::make_shared<Storage>();
  s->shape = std::move(shape);
  s->data = std::move(data);
  return Tensor(std::move(s));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ShapeError("from_rows: no rows");
  int c = static_cast<int>(rows[0].size());
  std::vector<double> flat;
  flat.reserve(rows.size() * static_cast<std::size_t>(c));
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != c)
      throw ShapeError("from_rows: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from({static_cast<int>(rows.size()), c}, std::move(flat));
}

void Tensor::ensure() const {
  if (!s_) throw StateError("use of undefined tensor");
}

const std::vector<int>& Tensor::shape() const {
  ensure();
  return s_->shape;
}

int Tensor::size() const {
  ensure();
  return static_cast<int>(s_->data.size());
}

int Tensor::rank() const {
  ensure();
  return static_cast<int>(s_->shape.size());
}

int Tensor::rows() const {
  ensure();
  return s_->shape.size() == 1 ? 1 : s_->shape[0];
}

int Tensor::cols() const {
  ensure();
  return s_->shape.size() == 1 ? s_->shape[0] : s_->shape[1];
}

double* Tensor::data() {
  ensure();
  return s_->data.data();
}

const double* Tensor::data() const {
  ensure();
  return s_->data.data();
}

double Tensor::at(int i) const {
  ensure();
  return s_->data[static_cast<std::size_t>(i)];
}

double& Tensor::at(int i) {
  ensure();
  return s_->data[static_cast<std::size_t>(i)];
}

double Tensor::at(int r, int c) const { return at(r * cols() + c); }
double& Tensor::at(int r, int c) { return at(r * cols() + c); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() requires a size-1 tensor");
  return s_->data[0];
}

bool Tensor::requires_grad() const {
  ensure();
  return s_->requires_grad;
}

void Tensor::set_requires_grad(bool v) {
  ensure();
  s_->requires_grad = v;
}

double* Tensor::grad() {
  ensure();
  if (s_->grad.empty()) s_->grad.assign(s_->data.size(), 0.0);
  return s_->grad.data();
}

const double* Tensor::grad_data() const {
  ensure();
  return s_->grad.empty() ? nullptr : s_->grad.data();
}

void Tensor::zero_grad() {
  ensure();
  if (!s_->grad.empty()) s_->grad.assign(s_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  ensure();
  auto s = std::make_shared<Storage>();
  s->shape = s_->shape;
  s->data = s_->data;
  s->requires_grad = s_->requires_grad;
  return Tensor(std::move(s));
}

bool Tensor::all_finite() const {
  ensure();
  for (double v : s_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tape::record(std::function<void()> backward_fn) {
  ops_.push_back(std::move(backward_fn));
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward() expects a scalar loss tensor");
  if (!loss.requires_grad())
    throw StateError("backward() on a tensor with no recorded graph");
  loss.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace brainnet
