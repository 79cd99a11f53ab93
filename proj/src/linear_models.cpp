#include "mdbench/linear_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

// ---------------------------------------------------------------------------
// LinearSvm

void LinearSvm::do_fit(const EncodedDataset& train, const EncodedDataset&, const TrainConfig& cfg) {
  const auto& spec = std::get<LinearSvmSpec>(spec_);
  const auto& X = train.dense();
  const std::size_t n = X.rows, d = X.cols;

  // Sparse rows with the constant bias feature appended.
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  std::vector<double> qd(n);
  const double diag = 0.5 / spec.C;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = X.at(i, j);
      if (v == 0.0) continue;
      rows[i].emplace_back(j, v);
      sq += v * v;
    }
    rows[i].emplace_back(d, 1.0);
    qd[i] = sq + diag;
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = train.labels[i] == 1 ? 1.0 : -1.0;

  std::vector<double> w(d + 1, 0.0), alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, 0x5f5));
  iterations_ = 0;
  for (int iter = 0; iter < spec.max_iter; ++iter) {
    rng.shuffle(order);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (auto i : order) {
      double wx = 0.0;
      for (const auto& [j, v] : rows[i]) wx += w[j] * v;
      const double g = y[i] * wx - 1.0 + diag * alpha[i];
      const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::max(alpha[i] - g / qd[i], 0.0);
      const double delta = (alpha[i] - old) * y[i];
      for (const auto& [j, v] : rows[i]) w[j] += delta * v;
    }
    iterations_ = iter + 1;
    if (pg_max - pg_min <= spec.tol) break;
  }
  b_ = w[d];
  w.pop_back();
  w_ = std::move(w);
  log_.push_back({iterations_, "fit", 0.0, 0.0});
}

std::vector<double> LinearSvm::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  const auto& X = ds.dense();
  if (X.rows > 0 && X.cols != w_.size()) throw Error("linear_svm: input width does not match the fitted model");
  std::vector<double> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double s = b_;
    for (std::size_t j = 0; j < X.cols; ++j) s += w_[j] * X.at(i, j);
    out[i] = s;
  }
  return out;
}

std::vector<DenseMatrix> LinearSvm::state() const {
  DenseMatrix w(1, w_.size() + 1);
  std::copy(w_.begin(), w_.end(), w.data.begin());
  w.data.back() = b_;
  return {w};
}

void LinearSvm::load_state(const std::vector<DenseMatrix>& state) {
  if (state.size() != 1 || state[0].rows != 1 || state[0].cols < 1) throw Error("linear_svm: malformed state");
  w_.assign(state[0].data.begin(), state[0].data.end() - 1);
  b_ = state[0].data.back();
  fitted_ = true;
}

// ---------------------------------------------------------------------------
// KernelSvm

void KernelSvm::do_fit(const EncodedDataset& train, const EncodedDataset&, const TrainConfig&) {
  const auto& spec = std::get<KernelSvmSpec>(spec_);
  const auto& K = train.dense();
  const std::size_t n = K.rows;
  if (K.cols != n) throw Error("kernel_svm: training kernel must be square");
  const double C = spec.C;
  constexpr double kTau = 1e-12;

  y_.resize(n);
  for (std::size_t i = 0; i < n; ++i) y_[i] = train.labels[i] == 1 ? 1.0 : -1.0;
  auto Q = [&](std::size_t i, std::size_t j) { return y_[i] * y_[j] * K.at(i, j); };
  alpha_.assign(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto is_upper = [&](std::size_t t) { return alpha_[t] >= C; };
  auto is_lower = [&](std::size_t t) { return alpha_[t] <= 0.0; };

  iterations_ = 0;
  while (iterations_ < spec.max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gi = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y_[t] > 0) {
        if (!is_upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          gi = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!is_lower(t) && G[t] >= gmax) {
        gmax = G[t];
        gi = static_cast<std::ptrdiff_t>(t);
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t gj = -1;
    double obj_min = std::numeric_limits<double>::infinity();
    if (gi >= 0) {
      const auto i = static_cast<std::size_t>(gi);
      for (std::size_t t = 0; t < n; ++t) {
        if (y_[t] > 0) {
          if (is_lower(t)) continue;
          const double diff = gmax + G[t];
          gmax2 = std::max(gmax2, G[t]);
          if (diff > 0) {
            const double quad = K.at(i, i) + K.at(t, t) - 2.0 * y_[i] * Q(i, t);
            const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
            if (obj <= obj_min) {
              obj_min = obj;
              gj = static_cast<std::ptrdiff_t>(t);
            }
          }
        } else {
          if (is_upper(t)) continue;
          const double diff = gmax - G[t];
          gmax2 = std::max(gmax2, -G[t]);
          if (diff > 0) {
            const double quad = K.at(i, i) + K.at(t, t) + 2.0 * y_[i] * Q(i, t);
            const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
            if (obj <= obj_min) {
              obj_min = obj;
              gj = static_cast<std::ptrdiff_t>(t);
            }
          }
        }
      }
    }
    if (gi < 0 || gj < 0 || gmax + gmax2 < spec.tol) break;
    ++iterations_;

    const auto i = static_cast<std::size_t>(gi);
    const auto j = static_cast<std::size_t>(gj);
    const double old_ai = alpha_[i], old_aj = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (y_[i] != y_[j]) {
      double quad = K.at(i, i) + K.at(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > C) {
          ai = C;
          aj = C - diff;
        }
      } else if (aj > C) {
        aj = C;
        ai = C + diff;
      }
    } else {
      double quad = K.at(i, i) + K.at(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) {
          ai = C;
          aj = sum - C;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > C) {
        if (aj > C) {
          aj = C;
          ai = sum - C;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }
    const double dai = ai - old_ai, daj = aj - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y_[t] * G[t];
    if (is_upper(t)) {
      if (y_[t] < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (is_lower(t)) {
      if (y_[t] > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  rho_ = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  log_.push_back({iterations_, "fit", 0.0, 0.0});
}

std::vector<double> KernelSvm::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  const auto& K = ds.dense();
  if (K.rows > 0 && K.cols != alpha_.size()) throw Error("kernel_svm: kernel columns do not match the training set");
  std::vector<double> out(K.rows);
  for (std::size_t r = 0; r < K.rows; ++r) {
    double s = -rho_;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      if (alpha_[i] != 0.0) s += alpha_[i] * y_[i] * K.at(r, i);
    }
    out[r] = s;
  }
  return out;
}

std::vector<DenseMatrix> KernelSvm::state() const {
  DenseMatrix m(2, alpha_.size());
  std::copy(alpha_.begin(), alpha_.end(), m.data.begin());
  std::copy(y_.begin(), y_.end(), m.data.begin() + static_cast<std::ptrdiff_t>(alpha_.size()));
  return {m, DenseMatrix(1, 1, rho_)};
}

void KernelSvm::load_state(const std::vector<DenseMatrix>& state) {
  if (state.size() != 2 || state[0].rows != 2 || state[1].data.size() != 1) throw Error("kernel_svm: malformed state");
  const std::size_t n = state[0].cols;
  alpha_.assign(state[0].data.begin(), state[0].data.begin() + static_cast<std::ptrdiff_t>(n));
  y_.assign(state[0].data.begin() + static_cast<std::ptrdiff_t>(n), state[0].data.end());
  rho_ = state[1].data[0];
  fitted_ = true;
}

// ---------------------------------------------------------------------------
// Knn

void Knn::do_fit(const EncodedDataset& train, const EncodedDataset&, const TrainConfig&) {
  train_ = train.dense();
  labels_ = train.labels;
  log_.push_back({0, "fit", 0.0, 0.0});
}

std::vector<std::size_t> Knn::neighbours(std::span<const double> x) const {
  require_fitted();
  if (x.size() != train_.cols) throw Error("knn: input width does not match the training set");
  std::vector<std::pair<double, std::size_t>> dist(train_.rows);
  for (std::size_t i = 0; i < train_.rows; ++i) {
    double s = 0.0;
    const auto row = train_.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = row[j] - x[j];
      s += d * d;
    }
    dist[i] = {s, i};
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::get<KnnSpec>(spec_).k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(dist[i].second);
  return out;
}

std::vector<double> Knn::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  const auto& X = ds.dense();
  std::vector<double> out(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const auto nn = neighbours(X.row(r));
    double mal = 0.0;
    for (auto i : nn) mal += labels_[i];
    out[r] = nn.empty() ? 0.0 : mal / static_cast<double>(nn.size());
  }
  return out;
}

std::vector<DenseMatrix> Knn::state() const {
  DenseMatrix labels(1, labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) labels.data[i] = labels_[i];
  return {train_, labels};
}

void Knn::load_state(const std::vector<DenseMatrix>& state) {
  if (state.size() != 2 || state[1].data.size() != state[0].rows) throw Error("knn: malformed state");
  train_ = state[0];
  labels_.clear();
  for (double v : state[1].data) labels_.push_back(static_cast<int>(v));
  fitted_ = true;
}

}  // namespace mdbench
