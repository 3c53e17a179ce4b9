#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace brainnet {

// Dense 64-bit tensor with optional gradient buffer. Copies share storage;
// parameters are long-lived Tensors whose grad accumulates across a backward
// pass and is cleared by the optimizer or by zero_grad().
//
// Rank 1 and 2 cover everything this model needs; scalars use shape {1}.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  bool defined() const { return s_ != nullptr; }
  const std::vector<int>& shape() const;
  int size() const;
  int rank() const;
  // Rank-2 accessors; a rank-1 tensor counts as a single row.
  int rows() const;
  int cols() const;

  double* data();
  const double* data() const;
  double at(int i) const;
  double& at(int i);
  double at(int r, int c) const;
  double& at(int r, int c);

  // Value of a size-1 tensor.
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);
  // Gradient buffer, allocated zero on first touch.
  double* grad();
  // Read-only view; nullptr when never touched.
  const double* grad_data() const;
  void zero_grad();

  // Deep copy (fresh storage, grad not copied).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  bool all_finite() const;

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first use
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;

  explicit Tensor(std::shared_ptr<Storage> s) : s_(std::move(s)) {}
  void ensure() const;
};

// Reverse-mode tape. A forward pass appends one backward closure per recorded
// op; backward() seeds d(loss)=1 and replays in reverse order (append order is
// already topological). One tape per pass; separate threads use separate
// tapes. Passing a null Tape* to an op skips recording (pure evaluation).
class Tape {
 public:
  void record(std::function<void()> backward_fn);
  void backward(Tensor& loss);
  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

}  // namespace brainnet
