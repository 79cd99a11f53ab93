#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mdbench {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

// Malicious (1) is the positive class. Throws Error on length mismatch or
// non-binary values.
ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

// A 0/0 ratio evaluates to 0 with `undefined` set.
struct MetricValue {
  double value = 0.0;
  bool undefined = false;
};

MetricValue f1_score(const ConfusionCounts& c);
MetricValue accuracy(const ConfusionCounts& c);
MetricValue tpr(const ConfusionCounts& c);
MetricValue fpr(const ConfusionCounts& c);

enum class MetricKind { f1, accuracy, tpr, fpr };
std::string to_string(MetricKind kind);
MetricValue metric(MetricKind kind, const ConfusionCounts& c);

// Area under time: (1/(N-1)) * sum_k (f(k) + f(k+1)) / 2. Throws Error for N < 2.
double aut(std::span<const double> series);

// f(0) is the base-period value; f(j) the j-th evolution bucket. Missing
// entries (empty bucket or 0/0 metric) are left out of AUT and the remaining
// points are treated as consecutive.
struct MetricSeries {
  MetricKind metric = MetricKind::f1;
  std::vector<double> values;
  std::vector<bool> missing;

  std::size_t size() const { return values.size(); }
  // AUT over f(0)..f(n_points-1). `undefined` when fewer than two present
  // points remain.
  MetricValue aut_over(std::size_t n_points) const;
};

MetricSeries evolution_series(std::span<const ConfusionCounts> periods, MetricKind kind);

}  // namespace mdbench
