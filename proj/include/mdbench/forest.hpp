#pragma once

#include <cstdint>
#include <vector>

#include "mdbench/models.hpp"

namespace mdbench {

// Bootstrap-aggregated CART trees (gini impurity, sqrt(d) candidate features
// per split, grown until pure unless max_depth is set). Score = mean leaf
// probability of the malicious class.
class RandomForest : public Model {
 public:
  explicit RandomForest(RandomForestSpec spec) : Model(spec) {}

  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  std::vector<DenseMatrix> state() const override;
  void load_state(const std::vector<DenseMatrix>& state) override;

  std::size_t tree_count() const { return trees_.size(); }

 protected:
  void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) override;
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }

 private:
  struct Node {
    std::int64_t feature = -1;  // -1 for leaves
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int64_t left = -1;
    std::int64_t right = -1;
    double value = 0.0;         // malicious share at this node
  };
  using Tree = std::vector<Node>;

  double tree_score(const Tree& tree, std::span<const double> x) const;

  std::size_t n_features_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace mdbench
