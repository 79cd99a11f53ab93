#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mdbench {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> vocabulary, std::size_t dim, std::vector<double> vectors);

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vocabulary_.size(); }
  std::span<const double> vector(std::size_t row) const { return {vectors_.data() + row * dim_, dim_}; }
  const std::vector<double>& data() const { return vectors_; }
  std::optional<std::size_t> index_of(const std::string& token) const;

 private:
  std::vector<std::string> vocabulary_;  // sorted
  std::size_t dim_ = 0;
  std::vector<double> vectors_;          // row-major |V| x dim
  std::unordered_map<std::string, std::size_t> index_;
};

struct SkipGramOptions {
  std::size_t dim = 10;
  std::size_t window = 2;
  std::size_t negative_samples = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of its start value
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

// Skip-gram with negative sampling (unigram^0.75 noise). Throws Error on an
// empty corpus or dim == 0.
SkipGramResult train_skipgram(const std::vector<std::vector<std::string>>& sequences, const SkipGramOptions& options);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centers;          // row-major k x dim
  std::vector<std::size_t> assignment;  // per point
  std::vector<double> inertia_history;  // after every assignment step
  int iterations = 0;

  std::span<const double> center(std::size_t c) const { return {centers.data() + c * dim, dim}; }
};

// Lloyd's algorithm with k-means++ seeding. k is clamped to n. Throws Error on
// empty input or k == 0.
KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, int max_iter,
                    std::uint64_t seed);

// Index of the nearest center (ties to the lower index).
std::size_t nearest_center(const KMeansResult& km, std::span<const double> point);

}  // namespace mdbench
