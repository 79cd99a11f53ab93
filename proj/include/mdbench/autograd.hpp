#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mdbench/encoded.hpp"
#include "mdbench/rng.hpp"

namespace mdbench::nn {

using Matrix = DenseMatrix;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
};

class ParamStore {
 public:
  // Glorot-uniform init for 2-D weights, zeros for 1 x n biases.
  std::size_t add_weight(std::string name, std::size_t rows, std::size_t cols, Rng& rng);
  std::size_t add_bias(std::string name, std::size_t cols, double fill = 0.0);

  Parameter& at(std::size_t i) { return params_.at(i); }
  const Parameter& at(std::size_t i) const { return params_.at(i); }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<Parameter> params_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& store);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Constant sparse matrix in CSR form.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> val;
};

// Reverse-mode tape. Every op records its value and a backward closure; the
// backward sweep runs in reverse creation order and deposits parameter
// gradients into the ParamStore.
class Tape {
 public:
  using Id = std::size_t;

  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  Id constant(Matrix value);
  Id param(std::size_t index);
  // Leaf whose gradient is kept and readable through grad() after backward.
  Id variable(Matrix value);
  const Matrix& grad(Id id);

  const Matrix& value(Id id) const { return nodes_.at(id).value; }
  double scalar(Id id) const;
  // Seeds d(root) = 1; root must be 1 x 1.
  void backward(Id root);

  Id matmul(Id a, Id b);
  Id add_row(Id a, Id bias);  // a + broadcast 1 x c bias
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id a, double s);
  Id add_scalar(Id a, double s);
  Id relu(Id a);
  Id sigmoid(Id a);
  Id tanh(Id a);
  Id softmax_rows(Id a);
  Id concat_cols(std::span<const Id> parts);
  Id concat_rows(std::span<const Id> parts);
  Id slice_cols(Id a, std::size_t begin, std::size_t end);
  Id gather_rows(Id a, std::span<const std::size_t> rows);
  Id sum_all(Id a);
  Id mean_all(Id a);
  Id row_sum_squares(Id a);  // n x 1
  // Mean binary cross-entropy of n x 1 logits against 0/1 targets.
  Id bce_with_logits(Id logits, std::span<const double> targets);
  Id spmm(const SparseMatrix& s, Id a);
  // Segment reductions over consecutive row ranges [offsets[i], offsets[i+1]);
  // empty segments give zero rows.
  Id segment_mean(Id a, std::span<const std::size_t> offsets);
  Id segment_max(Id a, std::span<const std::size_t> offsets);
  // Convolution of one-hot sequences with a (V*k) x F filter bank laid out as
  // row (token * k + offset). Windows start at t in [0, max(1, len-k+1)), so
  // padding past the last real token never enters the output. Returns the
  // stacked window activations (bias added) and fills `offsets` per sequence.
  Id conv_onehot(std::span<const std::vector<std::int32_t>> sequences, std::size_t kernel, Id filters, Id bias,
                 std::vector<std::size_t>& offsets);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::ptrdiff_t param = -1;
    std::function<void()> back;
  };

  Id push(Matrix value, bool needs_grad, std::function<void()> back = {});
  bool needs(Id id) const { return nodes_[id].needs_grad; }
  Matrix& grad_of(Id id);

  ParamStore* store_;
  std::vector<Node> nodes_;
};

}  // namespace mdbench::nn
