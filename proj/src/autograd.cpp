#include "mdbench/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "mdbench/error.hpp"

namespace mdbench::nn {

std::size_t ParamStore::add_weight(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (auto& v : p.value.data) v = (2.0 * rng.uniform() - 1.0) * limit;
  p.grad = Matrix(rows, cols);
  p.adam_m = Matrix(rows, cols);
  p.adam_v = Matrix(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::add_bias(std::string name, std::size_t cols, double fill) {
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix(1, cols, fill);
  p.grad = Matrix(1, cols);
  p.adam_m = Matrix(1, cols);
  p.adam_v = Matrix(1, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.data.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

std::vector<Matrix> ParamStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw Error("parameter snapshot does not match the model");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows != params_[i].value.rows || values[i].cols != params_[i].value.cols) {
      throw Error("parameter snapshot shape mismatch for " + params_[i].name);
    }
    params_[i].value = values[i];
  }
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store.at(i);
    for (std::size_t j = 0; j < p.value.data.size(); ++j) {
      const double g = p.grad.data[j];
      double& m = p.adam_m.data[j];
      double& v = p.adam_v.data[j];
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g * g;
      p.value.data[j] -= lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

// c += a * b, skipping zero entries of a (inputs are often sparse).
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.data.data() + i * m;
    const double* arow = a.data.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a^T * b
void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    const double* brow = b.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a * b^T
void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows, m = a.cols, k = b.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * m;
    double* crow = c.data.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data.data() + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += arow[j] * brow[j];
      crow[p] += s;
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Id Tape::push(Matrix value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Matrix& Tape::grad_of(Id id) {
  auto& n = nodes_[id];
  if (n.grad.data.size() != n.value.data.size()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

Tape::Id Tape::constant(Matrix value) { return push(std::move(value), false); }

Tape::Id Tape::param(std::size_t index) {
  if (!store_) throw Error("tape has no parameter store");
  const Id id = push(store_->at(index).value, true);
  nodes_[id].param = static_cast<std::ptrdiff_t>(index);
  return id;
}

Tape::Id Tape::variable(Matrix value) { return push(std::move(value), true); }

const Matrix& Tape::grad(Id id) { return grad_of(id); }

double Tape::scalar(Id id) const {
  const auto& v = value(id);
  if (v.data.size() != 1) throw Error("tape value is not a scalar");
  return v.data[0];
}

void Tape::backward(Id root) {
  if (value(root).data.size() != 1) throw Error("backward needs a scalar root");
  grad_of(root).data[0] = 1.0;
  for (Id i = root + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.data.empty()) continue;
    if (n.param >= 0) {
      auto& g = store_->at(static_cast<std::size_t>(n.param)).grad;
      for (std::size_t j = 0; j < g.data.size(); ++j) g.data[j] += n.grad.data[j];
    } else if (n.back) {
      n.back();
    }
  }
}

Tape::Id Tape::matmul(Id a, Id b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols != B.rows) {
    throw Error("matmul: inner dimensions differ (" + std::to_string(A.cols) + " vs " + std::to_string(B.rows) + ")");
  }
  Matrix C(A.rows, B.cols);
  gemm_acc(A, B, C);
  const Id out = nodes_.size();
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    const auto& G = nodes_[out].grad;
    if (needs(a)) gemm_nt_acc(G, nodes_[b].value, grad_of(a));
    if (needs(b)) gemm_tn_acc(nodes_[a].value, G, grad_of(b));
  });
}

Tape::Id Tape::add_row(Id a, Id bias) {
  const auto& A = value(a);
  const auto& b = value(bias);
  if (b.rows != 1 || b.cols != A.cols) throw Error("add_row: bias must be 1 x cols");
  Matrix C = A;
  for (std::size_t i = 0; i < C.rows; ++i) {
    for (std::size_t j = 0; j < C.cols; ++j) C.at(i, j) += b.data[j];
  }
  const Id out = nodes_.size();
  return push(std::move(C), needs(a) || needs(bias), [this, a, bias, out] {
    const auto& G = nodes_[out].grad;
    if (needs(a)) {
      auto& ga = grad_of(a);
      for (std::size_t j = 0; j < G.data.size(); ++j) ga.data[j] += G.data[j];
    }
    if (needs(bias)) {
      auto& gb = grad_of(bias);
      for (std::size_t i = 0; i < G.rows; ++i) {
        for (std::size_t j = 0; j < G.cols; ++j) gb.data[j] += G.at(i, j);
      }
    }
  });
}

Tape::Id Tape::add(Id a, Id b) {
  check_same_shape(value(a), value(b), "add");
  Matrix C = value(a);
  for (std::size_t j = 0; j < C.data.size(); ++j) C.data[j] += value(b).data[j];
  const Id out = nodes_.size();
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    const auto& G = nodes_[out].grad;
    for (Id p : {a, b}) {
      if (!needs(p)) continue;
      auto& g = grad_of(p);
      for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j];
    }
  });
}

Tape::Id Tape::sub(Id a, Id b) {
  check_same_shape(value(a), value(b), "sub");
  Matrix C = value(a);
  for (std::size_t j = 0; j < C.data.size(); ++j) C.data[j] -= value(b).data[j];
  const Id out = nodes_.size();
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    const auto& G = nodes_[out].grad;
    if (needs(a)) {
      auto& g = grad_of(a);
      for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j];
    }
    if (needs(b)) {
      auto& g = grad_of(b);
      for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] -= G.data[j];
    }
  });
}

Tape::Id Tape::mul(Id a, Id b) {
  check_same_shape(value(a), value(b), "mul");
  Matrix C = value(a);
  for (std::size_t j = 0; j < C.data.size(); ++j) C.data[j] *= value(b).data[j];
  const Id out = nodes_.size();
  return push(std::move(C), needs(a) || needs(b), [this, a, b, out] {
    const auto& G = nodes_[out].grad;
    if (needs(a)) {
      auto& g = grad_of(a);
      const auto& B = nodes_[b].value;
      for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j] * B.data[j];
    }
    if (needs(b)) {
      auto& g = grad_of(b);
      const auto& A = nodes_[a].value;
      for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j] * A.data[j];
    }
  });
}

Tape::Id Tape::scale(Id a, double s) {
  Matrix C = value(a);
  for (auto& v : C.data) v *= s;
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, s, out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += s * G.data[j];
  });
}

Tape::Id Tape::add_scalar(Id a, double s) {
  Matrix C = value(a);
  for (auto& v : C.data) v += s;
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j];
  });
}

Tape::Id Tape::relu(Id a) {
  Matrix C = value(a);
  for (auto& v : C.data) v = v > 0.0 ? v : 0.0;
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    const auto& A = nodes_[a].value;
    auto& g = grad_of(a);
    for (std::size_t j = 0; j < G.data.size(); ++j) {
      if (A.data[j] > 0.0) g.data[j] += G.data[j];
    }
  });
}

Tape::Id Tape::sigmoid(Id a) {
  Matrix C = value(a);
  for (auto& v : C.data) v = stable_sigmoid(v);
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    const auto& Y = nodes_[out].value;
    auto& g = grad_of(a);
    for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j] * Y.data[j] * (1.0 - Y.data[j]);
  });
}

Tape::Id Tape::tanh(Id a) {
  Matrix C = value(a);
  for (auto& v : C.data) v = std::tanh(v);
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    const auto& Y = nodes_[out].value;
    auto& g = grad_of(a);
    for (std::size_t j = 0; j < G.data.size(); ++j) g.data[j] += G.data[j] * (1.0 - Y.data[j] * Y.data[j]);
  });
}

Tape::Id Tape::softmax_rows(Id a) {
  Matrix C = value(a);
  for (std::size_t i = 0; i < C.rows; ++i) {
    auto row = C.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (auto& v : row) s += (v = std::exp(v - mx));
    for (auto& v : row) v /= s;
  }
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    const auto& Y = nodes_[out].value;
    auto& g = grad_of(a);
    for (std::size_t i = 0; i < Y.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < Y.cols; ++j) dot += G.at(i, j) * Y.at(i, j);
      for (std::size_t j = 0; j < Y.cols; ++j) g.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
    }
  });
}

Tape::Id Tape::concat_cols(std::span<const Id> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  bool any = false;
  for (Id p : parts) {
    if (value(p).rows != rows) throw Error("concat_cols: row count mismatch");
    cols += value(p).cols;
    any = any || needs(p);
  }
  Matrix C(rows, cols);
  std::size_t off = 0;
  for (Id p : parts) {
    const auto& P = value(p);
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(P.row(i).begin(), P.row(i).end(), C.row(i).begin() + static_cast<std::ptrdiff_t>(off));
    }
    off += P.cols;
  }
  const Id out = nodes_.size();
  std::vector<Id> ps(parts.begin(), parts.end());
  return push(std::move(C), any, [this, ps, out] {
    const auto& G = nodes_[out].grad;
    std::size_t off = 0;
    for (Id p : ps) {
      const std::size_t w = nodes_[p].value.cols;
      if (needs(p)) {
        auto& g = grad_of(p);
        for (std::size_t i = 0; i < G.rows; ++i) {
          for (std::size_t j = 0; j < w; ++j) g.at(i, j) += G.at(i, off + j);
        }
      }
      off += w;
    }
  });
}

Tape::Id Tape::concat_rows(std::span<const Id> parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols;
  Matrix C;
  C.cols = cols;
  bool any = false;
  for (Id p : parts) {
    const auto& P = value(p);
    if (P.cols != cols) throw Error("concat_rows: column count mismatch");
    C.data.insert(C.data.end(), P.data.begin(), P.data.end());
    C.rows += P.rows;
    any = any || needs(p);
  }
  const Id out = nodes_.size();
  std::vector<Id> ps(parts.begin(), parts.end());
  return push(std::move(C), any, [this, ps, out] {
    const auto& G = nodes_[out].grad;
    std::size_t off = 0;
    for (Id p : ps) {
      const std::size_t n = nodes_[p].value.data.size();
      if (needs(p)) {
        auto& g = grad_of(p);
        for (std::size_t j = 0; j < n; ++j) g.data[j] += G.data[off + j];
      }
      off += n;
    }
  });
}

Tape::Id Tape::slice_cols(Id a, std::size_t begin, std::size_t end) {
  const auto& A = value(a);
  if (begin > end || end > A.cols) throw Error("slice_cols: range out of bounds");
  Matrix C(A.rows, end - begin);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = begin; j < end; ++j) C.at(i, j - begin) = A.at(i, j);
  }
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, begin, end, out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t i = 0; i < G.rows; ++i) {
      for (std::size_t j = begin; j < end; ++j) g.at(i, j) += G.at(i, j - begin);
    }
  });
}

Tape::Id Tape::gather_rows(Id a, std::span<const std::size_t> rows) {
  const auto& A = value(a);
  Matrix C(rows.size(), A.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows) throw Error("gather_rows: row index out of range");
    std::copy(A.row(rows[i]).begin(), A.row(rows[i]).end(), C.row(i).begin());
  }
  const Id out = nodes_.size();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return push(std::move(C), needs(a), [this, a, idx = std::move(idx), out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < G.cols; ++j) g.at(idx[i], j) += G.at(i, j);
    }
  });
}

Tape::Id Tape::sum_all(Id a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  Matrix C(1, 1, s);
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const double G = nodes_[out].grad.data[0];
    auto& g = grad_of(a);
    for (auto& v : g.data) v += G;
  });
}

Tape::Id Tape::mean_all(Id a) {
  const std::size_t n = value(a).data.size();
  if (n == 0) throw Error("mean_all: empty input");
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Tape::Id Tape::row_sum_squares(Id a) {
  const auto& A = value(a);
  Matrix C(A.rows, 1);
  for (std::size_t i = 0; i < A.rows; ++i) {
    double s = 0.0;
    for (double v : A.row(i)) s += v * v;
    C.data[i] = s;
  }
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, a, out] {
    const auto& G = nodes_[out].grad;
    const auto& A = nodes_[a].value;
    auto& g = grad_of(a);
    for (std::size_t i = 0; i < A.rows; ++i) {
      for (std::size_t j = 0; j < A.cols; ++j) g.at(i, j) += 2.0 * A.at(i, j) * G.data[i];
    }
  });
}

Tape::Id Tape::bce_with_logits(Id logits, std::span<const double> targets) {
  const auto& Z = value(logits);
  if (Z.cols != 1 || Z.rows != targets.size() || Z.rows == 0) throw Error("bce_with_logits: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < Z.rows; ++i) {
    const double z = Z.data[i];
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const double n = static_cast<double>(Z.rows);
  Matrix C(1, 1, loss / n);
  const Id out = nodes_.size();
  std::vector<double> t(targets.begin(), targets.end());
  return push(std::move(C), needs(logits), [this, logits, t = std::move(t), n, out] {
    const double G = nodes_[out].grad.data[0];
    const auto& Z = nodes_[logits].value;
    auto& g = grad_of(logits);
    for (std::size_t i = 0; i < Z.rows; ++i) g.data[i] += G * (stable_sigmoid(Z.data[i]) - t[i]) / n;
  });
}

Tape::Id Tape::spmm(const SparseMatrix& s, Id a) {
  const auto& A = value(a);
  if (s.cols != A.rows) throw Error("spmm: dimension mismatch");
  Matrix C(s.rows, A.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
      const double v = s.val[p];
      const auto src = A.row(s.col[p]);
      auto dst = C.row(i);
      for (std::size_t j = 0; j < A.cols; ++j) dst[j] += v * src[j];
    }
  }
  const Id out = nodes_.size();
  return push(std::move(C), needs(a), [this, s, a, out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t i = 0; i < s.rows; ++i) {
      for (std::size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
        const double v = s.val[p];
        auto dst = g.row(s.col[p]);
        const auto src = G.row(i);
        for (std::size_t j = 0; j < G.cols; ++j) dst[j] += v * src[j];
      }
    }
  });
}

Tape::Id Tape::segment_mean(Id a, std::span<const std::size_t> offsets) {
  const auto& A = value(a);
  if (offsets.empty() || offsets.back() != A.rows) throw Error("segment_mean: offsets do not cover the input");
  const std::size_t k = offsets.size() - 1;
  Matrix C(k, A.cols);
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t n = offsets[s + 1] - offsets[s];
    if (n == 0) continue;
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      for (std::size_t j = 0; j < A.cols; ++j) C.at(s, j) += A.at(i, j);
    }
    for (std::size_t j = 0; j < A.cols; ++j) C.at(s, j) /= static_cast<double>(n);
  }
  const Id out = nodes_.size();
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return push(std::move(C), needs(a), [this, a, off = std::move(off), out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const std::size_t n = off[s + 1] - off[s];
      for (std::size_t i = off[s]; i < off[s + 1]; ++i) {
        for (std::size_t j = 0; j < G.cols; ++j) g.at(i, j) += G.at(s, j) / static_cast<double>(n);
      }
    }
  });
}

Tape::Id Tape::segment_max(Id a, std::span<const std::size_t> offsets) {
  const auto& A = value(a);
  if (offsets.empty() || offsets.back() != A.rows) throw Error("segment_max: offsets do not cover the input");
  const std::size_t k = offsets.size() - 1;
  Matrix C(k, A.cols);
  std::vector<std::size_t> argmax(k * A.cols, A.rows);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      for (std::size_t j = 0; j < A.cols; ++j) {
        auto& am = argmax[s * A.cols + j];
        if (am == A.rows || A.at(i, j) > A.at(am, j)) am = i;
      }
    }
    for (std::size_t j = 0; j < A.cols; ++j) {
      const auto am = argmax[s * A.cols + j];
      if (am != A.rows) C.at(s, j) = A.at(am, j);
    }
  }
  const Id out = nodes_.size();
  const std::size_t n_rows = A.rows;
  return push(std::move(C), needs(a), [this, a, argmax = std::move(argmax), n_rows, out] {
    const auto& G = nodes_[out].grad;
    auto& g = grad_of(a);
    for (std::size_t s = 0; s < G.rows; ++s) {
      for (std::size_t j = 0; j < G.cols; ++j) {
        const auto am = argmax[s * G.cols + j];
        if (am != n_rows) g.at(am, j) += G.at(s, j);
      }
    }
  });
}

Tape::Id Tape::conv_onehot(std::span<const std::vector<std::int32_t>> sequences, std::size_t kernel, Id filters,
                           Id bias, std::vector<std::size_t>& offsets) {
  const auto& W = value(filters);
  const auto& b = value(bias);
  if (kernel == 0 || W.rows % kernel != 0) throw Error("conv_onehot: filter rows must be vocab * kernel");
  const std::size_t vocab = W.rows / kernel;
  const std::size_t F = W.cols;
  if (b.rows != 1 || b.cols != F) throw Error("conv_onehot: bias must be 1 x filters");
  offsets.assign(1, 0);
  for (const auto& s : sequences) {
    const std::size_t windows = s.size() >= kernel ? s.size() - kernel + 1 : 1;
    offsets.push_back(offsets.back() + windows);
  }
  Matrix C(offsets.back(), F);
  for (std::size_t q = 0; q < sequences.size(); ++q) {
    const auto& s = sequences[q];
    for (std::size_t t = 0; offsets[q] + t < offsets[q + 1]; ++t) {
      auto out = C.row(offsets[q] + t);
      for (std::size_t f = 0; f < F; ++f) out[f] = b.data[f];
      for (std::size_t d = 0; d < kernel && t + d < s.size(); ++d) {
        const auto tok = static_cast<std::size_t>(s[t + d]);
        if (tok >= vocab) throw Error("conv_onehot: token outside vocabulary");
        const auto w = W.row(tok * kernel + d);
        for (std::size_t f = 0; f < F; ++f) out[f] += w[f];
      }
    }
  }
  const Id out = nodes_.size();
  std::vector<std::size_t> off = offsets;
  std::vector<std::vector<std::int32_t>> seqs(sequences.begin(), sequences.end());
  return push(std::move(C), needs(filters) || needs(bias),
              [this, filters, bias, kernel, off = std::move(off), seqs = std::move(seqs), out] {
                const auto& G = nodes_[out].grad;
                const std::size_t F = G.cols;
                if (needs(bias)) {
                  auto& gb = grad_of(bias);
                  for (std::size_t i = 0; i < G.rows; ++i) {
                    for (std::size_t f = 0; f < F; ++f) gb.data[f] += G.at(i, f);
                  }
                }
                if (!needs(filters)) return;
                auto& gw = grad_of(filters);
                for (std::size_t q = 0; q < seqs.size(); ++q) {
                  const auto& s = seqs[q];
                  for (std::size_t t = 0; off[q] + t < off[q + 1]; ++t) {
                    const auto grow = G.row(off[q] + t);
                    for (std::size_t d = 0; d < kernel && t + d < s.size(); ++d) {
                      auto w = gw.row(static_cast<std::size_t>(s[t + d]) * kernel + d);
                      for (std::size_t f = 0; f < F; ++f) w[f] += grow[f];
                    }
                  }
                }
              });
}

}  // namespace mdbench::nn
