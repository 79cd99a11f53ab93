#include "mdbench/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocabulary, std::size_t dim, std::vector<double> vectors)
    : vocabulary_(std::move(vocabulary)), dim_(dim), vectors_(std::move(vectors)) {
  if (vectors_.size() != vocabulary_.size() * dim_) throw Error("embedding table shape mismatch");
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_.emplace(vocabulary_[i], i);
}

std::optional<std::size_t> EmbeddingTable::index_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<std::string>>& sequences, const SkipGramOptions& opt) {
  if (opt.dim == 0) throw Error("embedding dim must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sequences) {
    for (const auto& t : s) ++counts[t];
  }
  if (counts.empty()) throw Error("skip-gram corpus is empty");

  std::vector<std::string> vocab;
  std::vector<double> freq;
  for (const auto& [tok, c] : counts) {
    vocab.push_back(tok);
    freq.push_back(std::pow(static_cast<double>(c), 0.75));
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
  std::vector<double> noise_cdf(freq.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < freq.size(); ++i) noise_cdf[i] = (acc += freq[i]);

  const std::size_t V = vocab.size(), d = opt.dim;
  Rng rng(opt.seed);
  std::vector<double> in(V * d), out(V * d, 0.0);
  for (auto& w : in) w = (rng.uniform() - 0.5) / static_cast<double>(d);

  std::vector<std::vector<std::size_t>> encoded;
  std::size_t n_pairs = 0;
  for (const auto& s : sequences) {
    std::vector<std::size_t> e;
    for (const auto& t : s) e.push_back(index.at(t));
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::size_t lo = i >= opt.window ? i - opt.window : 0;
      const std::size_t hi = std::min(e.size() - 1, i + opt.window);
      n_pairs += hi - lo;
    }
    encoded.push_back(std::move(e));
  }

  SkipGramResult result;
  const double total = static_cast<double>(std::max<std::size_t>(1, n_pairs * opt.epochs));
  std::size_t seen = 0;
  std::vector<double> grad(d);
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double loss = 0.0;
    std::size_t terms = 0;
    for (auto si : order) {
      const auto& e = encoded[si];
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::size_t lo = i >= opt.window ? i - opt.window : 0;
        const std::size_t hi = std::min(e.size() - 1, i + opt.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const double lr = std::max(opt.learning_rate * 1e-4,
                                     opt.learning_rate * (1.0 - static_cast<double>(seen) / total));
          ++seen;
          double* center = &in[e[i] * d];
          std::fill(grad.begin(), grad.end(), 0.0);
          double pair_loss = 0.0;
          auto update = [&](std::size_t target, double label) {
            double* ctx = &out[target * d];
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += center[k] * ctx[k];
            pair_loss -= label > 0 ? log_sigmoid(dot) : log_sigmoid(-dot);
            const double g = lr * (label - sigmoid(dot));
            for (std::size_t k = 0; k < d; ++k) {
              grad[k] += g * ctx[k];
              ctx[k] += g * center[k];
            }
          };
          update(e[j], 1.0);
          for (std::size_t s = 0; s < opt.negative_samples; ++s) {
            const double u = rng.uniform() * noise_cdf.back();
            auto neg = static_cast<std::size_t>(std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u) -
                                                noise_cdf.begin());
            neg = std::min(neg, V - 1);
            if (neg == e[j]) continue;
            update(neg, 0.0);
          }
          for (std::size_t k = 0; k < d; ++k) center[k] += grad[k];
          loss += pair_loss;
          ++terms;
        }
      }
    }
    result.epoch_loss.push_back(terms ? loss / static_cast<double>(terms) : 0.0);
  }
  for (double w : in) {
    if (!std::isfinite(w)) throw Error("skip-gram produced non-finite vectors");
  }
  result.table = EmbeddingTable(std::move(vocab), d, std::move(in));
  return result;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

}  // namespace

std::size_t nearest_center(const KMeansResult& km, std::span<const double> point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < km.k; ++c) {
    const double dist = sq_dist(point.data(), km.centers.data() + c * km.dim, km.dim);
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, int max_iter,
                    std::uint64_t seed) {
  if (n == 0 || dim == 0) throw Error("kmeans on empty input");
  if (k == 0) throw Error("kmeans needs k >= 1");
  if (points.size() != n * dim) throw Error("kmeans point buffer has the wrong size");
  k = std::min(k, n);
  Rng rng(seed);
  KMeansResult km;
  km.k = k;
  km.dim = dim;
  km.centers.resize(k * dim);

  // k-means++ seeding
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.index(n));
  chosen[first] = 1;
  std::copy_n(points.data() + first * dim, dim, km.centers.begin());
  for (std::size_t c = 1; c < k; ++c) {
    const double* last = km.centers.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points.data() + i * dim, last, dim));
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (!chosen[i] && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[static_cast<std::size_t>(rng.index(free.size()))];
    }
    chosen[pick] = 1;
    std::copy_n(points.data() + pick * dim, dim, km.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
  }

  km.assignment.assign(n, SIZE_MAX);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> sizes(k);
  for (int iter = 0; iter < std::max(1, max_iter); ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(km, points.subspan(i * dim, dim));
      inertia += sq_dist(points.data() + i * dim, km.centers.data() + c * dim, dim);
      if (c != km.assignment[i]) {
        km.assignment[i] = c;
        changed = true;
      }
    }
    km.inertia_history.push_back(inertia);
    km.iterations = iter + 1;
    if (!changed || iter + 1 >= std::max(1, max_iter)) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = km.assignment[i];
      ++sizes[c];
      for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += points[i * dim + t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t t = 0; t < dim; ++t) km.centers[c * dim + t] = sums[c * dim + t] / static_cast<double>(sizes[c]);
    }
  }
  return km;
}

}  // namespace mdbench
