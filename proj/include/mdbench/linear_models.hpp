#pragma once

#include <vector>

#include "mdbench/models.hpp"

namespace mdbench {

// L2-regularised squared-hinge linear SVM trained by dual coordinate descent.
// The bias is learned as the weight of a constant-1 feature.
class LinearSvm : public Model {
 public:
  explicit LinearSvm(LinearSvmSpec spec) : Model(spec) {}

  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  double default_threshold() const override { return 0.0; }
  std::vector<DenseMatrix> state() const override;
  void load_state(const std::vector<DenseMatrix>& state) override;

  const std::vector<double>& weights() const { return w_; }
  double bias() const { return b_; }
  int iterations() const { return iterations_; }

 protected:
  void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) override;
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }

 private:
  std::vector<double> w_;
  double b_ = 0.0;
  int iterations_ = 0;
};

// C-SVC on a precomputed kernel, solved with SMO (maximal-violating pair,
// second-order working set selection). Training input is the square train
// kernel; prediction input rows are kernel values against the train set.
class KernelSvm : public Model {
 public:
  explicit KernelSvm(KernelSvmSpec spec) : Model(spec) {}

  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  double default_threshold() const override { return 0.0; }
  std::vector<DenseMatrix> state() const override;
  void load_state(const std::vector<DenseMatrix>& state) override;

  const std::vector<double>& alpha() const { return alpha_; }  // dual variables, 0 <= alpha <= C
  const std::vector<double>& signed_labels() const { return y_; }
  double rho() const { return rho_; }
  int iterations() const { return iterations_; }

 protected:
  void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) override;
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::kernel_matrix; }

 private:
  std::vector<double> alpha_;
  std::vector<double> y_;
  double rho_ = 0.0;
  int iterations_ = 0;
};

// Exhaustive Euclidean k-nearest neighbours; score = share of malicious
// labels among the k nearest (distance ties go to the lower training index).
class Knn : public Model {
 public:
  explicit Knn(KnnSpec spec) : Model(spec) {}

  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  std::vector<DenseMatrix> state() const override;
  void load_state(const std::vector<DenseMatrix>& state) override;

  // Training-row indices of the k nearest neighbours of `x`, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> x) const;

 protected:
  void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) override;
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }
  bool allows_single_class() const override { return true; }

 private:
  DenseMatrix train_;
  std::vector<int> labels_;
};

}  // namespace mdbench
