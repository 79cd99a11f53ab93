#include "mdbench/metrics.hpp"

#include "mdbench/error.hpp"

namespace mdbench {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) {
    throw Error("confusion: " + std::to_string(labels.size()) + " labels vs " + std::to_string(predictions.size()) +
                " predictions");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) throw Error("confusion: values must be 0 or 1");
    if (y == 1) {
      (p == 1 ? c.tp : c.fn) += 1;
    } else {
      (p == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

namespace {

MetricValue ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

MetricValue f1_score(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
MetricValue accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
MetricValue tpr(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
MetricValue fpr(const ConfusionCounts& c) { return ratio(c.fp, c.fp + c.tn); }

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::f1: return "f1";
    case MetricKind::accuracy: return "accuracy";
    case MetricKind::tpr: return "tpr";
    case MetricKind::fpr: return "fpr";
  }
  return "f1";
}

MetricValue metric(MetricKind kind, const ConfusionCounts& c) {
  switch (kind) {
    case MetricKind::f1: return f1_score(c);
    case MetricKind::accuracy: return accuracy(c);
    case MetricKind::tpr: return tpr(c);
    case MetricKind::fpr: return fpr(c);
  }
  return f1_score(c);
}

double aut(std::span<const double> series) {
  if (series.size() < 2) throw Error("aut needs at least two points, got " + std::to_string(series.size()));
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < series.size(); ++k) s += (series[k] + series[k + 1]) / 2.0;
  return s / static_cast<double>(series.size() - 1);
}

MetricValue MetricSeries::aut_over(std::size_t n_points) const {
  if (n_points > values.size()) {
    throw Error("aut_over: requested " + std::to_string(n_points) + " points, series has " +
                std::to_string(values.size()));
  }
  std::vector<double> present;
  for (std::size_t i = 0; i < n_points; ++i) {
    if (!missing[i]) present.push_back(values[i]);
  }
  if (present.size() < 2) return {0.0, true};
  return {aut(present), false};
}

MetricSeries evolution_series(std::span<const ConfusionCounts> periods, MetricKind kind) {
  MetricSeries s;
  s.metric = kind;
  for (const auto& c : periods) {
    const auto v = metric(kind, c);
    s.values.push_back(v.value);
    s.missing.push_back(c.total() == 0 || v.undefined);
  }
  return s;
}

}  // namespace mdbench
