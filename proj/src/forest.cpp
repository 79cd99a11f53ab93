#include "mdbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

namespace {

struct Builder {
  const DenseMatrix& X;
  const std::vector<int>& y;
  std::size_t max_features;
  int max_depth;
  Rng& rng;

  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double impurity = 0.0;  // weighted child gini
    bool found = false;
  };

  static double gini(double pos, double n) {
    if (n <= 0) return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
  }

  Split best_split(const std::vector<std::size_t>& idx, double pos_total) {
    const std::size_t d = X.cols;
    const double n = static_cast<double>(idx.size());
    Split best;
    best.impurity = gini(pos_total, n) * n;
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    std::vector<std::pair<double, int>> vals(idx.size());
    // Draw features without replacement; keep drawing past max_features
    // only while no valid split has been found.
    for (std::size_t drawn = 0; drawn < d; ++drawn) {
      if (drawn >= max_features && best.found) break;
      const auto pick = drawn + static_cast<std::size_t>(rng.index(d - drawn));
      std::swap(features[drawn], features[pick]);
      const std::size_t f = features[drawn];
      for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = {X.at(idx[i], f), y[idx[i]]};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left_pos += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double imp = gini(left_pos, nl) * nl + gini(pos_total - left_pos, nr) * nr;
        if (imp < best.impurity - 1e-12) {
          best.impurity = imp;
          best.feature = f;
          best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
          best.found = true;
        }
      }
    }
    return best;
  }

  template <typename Tree>
  std::int64_t grow(Tree& tree, std::vector<std::size_t> idx, int depth) {
    double pos = 0.0;
    for (auto i : idx) pos += y[i];
    const auto id = static_cast<std::int64_t>(tree.size());
    tree.emplace_back();
    tree.back().value = pos / static_cast<double>(idx.size());
    const bool pure = pos == 0.0 || pos == static_cast<double>(idx.size());
    if (pure || idx.size() < 2 || (max_depth > 0 && depth >= max_depth)) return id;
    const Split s = best_split(idx, pos);
    if (!s.found) return id;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (X.at(i, s.feature) <= s.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const auto l = grow(tree, std::move(left), depth + 1);
    const auto r = grow(tree, std::move(right), depth + 1);
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int64_t>(s.feature);
    node.threshold = s.threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

void RandomForest::do_fit(const EncodedDataset& train, const EncodedDataset&, const TrainConfig& cfg) {
  const auto& spec = std::get<RandomForestSpec>(spec_);
  const auto& X = train.dense();
  n_features_ = X.cols;
  const std::size_t n = X.rows;
  const auto max_features =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(X.cols))));
  trees_.clear();
  for (int t = 0; t < spec.n_trees; ++t) {
    Rng rng(mix_seed(mix_seed(spec.seed, cfg.seed), static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.index(n));
    std::sort(sample.begin(), sample.end());
    Builder b{X, train.labels, max_features, spec.max_depth, rng};
    Tree tree;
    b.grow(tree, std::move(sample), 0);
    trees_.push_back(std::move(tree));
  }
  log_.push_back({spec.n_trees, "fit", 0.0, 0.0});
}

double RandomForest::tree_score(const Tree& tree, std::span<const double> x) const {
  std::size_t i = 0;
  while (tree[i].feature >= 0) {
    const auto& node = tree[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return tree[i].value;
}

std::vector<double> RandomForest::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  const auto& X = ds.dense();
  if (X.rows > 0 && X.cols != n_features_) throw Error("random_forest: input width does not match the fitted model");
  std::vector<double> out(X.rows, 0.0);
  for (std::size_t r = 0; r < X.rows; ++r) {
    double s = 0.0;
    for (const auto& t : trees_) s += tree_score(t, X.row(r));
    out[r] = trees_.empty() ? 0.0 : s / static_cast<double>(trees_.size());
  }
  return out;
}

std::vector<DenseMatrix> RandomForest::state() const {
  std::vector<DenseMatrix> out{DenseMatrix(1, 1, static_cast<double>(n_features_))};
  for (const auto& t : trees_) {
    DenseMatrix m(t.size(), 5);
    for (std::size_t i = 0; i < t.size(); ++i) {
      m.at(i, 0) = static_cast<double>(t[i].feature);
      m.at(i, 1) = t[i].threshold;
      m.at(i, 2) = static_cast<double>(t[i].left);
      m.at(i, 3) = static_cast<double>(t[i].right);
      m.at(i, 4) = t[i].value;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void RandomForest::load_state(const std::vector<DenseMatrix>& state) {
  if (state.empty() || state[0].data.size() != 1) throw Error("random_forest: malformed state");
  n_features_ = static_cast<std::size_t>(state[0].data[0]);
  trees_.clear();
  for (std::size_t k = 1; k < state.size(); ++k) {
    const auto& m = state[k];
    if (m.cols != 5 || m.rows == 0) throw Error("random_forest: malformed tree");
    Tree t(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      t[i].feature = static_cast<std::int64_t>(m.at(i, 0));
      t[i].threshold = m.at(i, 1);
      t[i].left = static_cast<std::int64_t>(m.at(i, 2));
      t[i].right = static_cast<std::int64_t>(m.at(i, 3));
      t[i].value = m.at(i, 4);
    }
    trees_.push_back(std::move(t));
  }
  fitted_ = true;
}

}  // namespace mdbench
