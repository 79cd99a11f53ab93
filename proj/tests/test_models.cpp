#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mdbench/error.hpp"
#include "mdbench/forest.hpp"
#include "mdbench/linear_models.hpp"
#include "mdbench/models.hpp"
#include "mdbench/neural.hpp"
#include "temp_dir.hpp"
#include "toy_data.hpp"

using namespace mdbench;
using testsupport::toy_dense;

namespace {

// Two Gaussian-free clusters in 2-D separated by the line x0 + x1 = 0 with
// margin `margin`.
EncodedDataset separable_2d(std::mt19937_64& rng, std::size_t n, double margin) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  EncodedDataset ds;
  DenseMatrix m(0, 2);
  while (ds.labels.size() < n) {
    const double a = u(rng), b = u(rng);
    const double s = (a + b) / std::sqrt(2.0);
    if (std::abs(s) < margin) continue;
    const double row[2] = {a, b};
    m.append_row(row);
    ds.labels.push_back(s > 0 ? 1 : 0);
    ds.app_ids.push_back("p" + std::to_string(ds.labels.size()));
  }
  ds.payload = std::move(m);
  return ds;
}

EncodedDataset linear_kernel(const EncodedDataset& ds) {
  const auto& x = ds.dense();
  EncodedDataset k = ds;
  k.kind = EncodingKind::kernel_matrix;
  DenseMatrix km(x.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.rows; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) s += x.at(i, c) * x.at(j, c);
      km.at(i, j) = s;
    }
  }
  k.payload = std::move(km);
  return k;
}

double training_accuracy(const Model& m, const EncodedDataset& ds) {
  const auto pred = m.predict_labels(ds);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ds.labels[i];
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

TrainConfig quick(int epochs = 3) {
  TrainConfig cfg;
  cfg.max_epochs = epochs;
  cfg.patience = 2;
  cfg.seed = 5;
  cfg.desk_scale_factor = 1.0;
  return cfg;
}

}  // namespace

TEST(Models, KnnStoresTrainingSetVerbatim) {
  std::mt19937_64 rng(1);
  const auto ds = toy_dense(rng, 12, 4);
  auto m = build_model(KnnSpec{3});
  m->fit(ds, ds, quick());
  const auto st = m->state();
  EXPECT_EQ(st[0], ds.dense());
  for (std::size_t i = 0; i < ds.rows(); ++i) EXPECT_EQ(st[1].data[i], ds.labels[i]);
}

TEST(Models, KnnSingleNeighbourScoreIsNeighbourLabel) {
  std::mt19937_64 rng(2);
  const auto train = toy_dense(rng, 20, 3);
  const auto query = toy_dense(rng, 15, 3);
  Knn knn(KnnSpec{1});
  knn.fit(train, train, quick());
  const auto scores = knn.predict_scores(query);
  for (std::size_t i = 0; i < query.rows(); ++i) {
    const auto nb = knn.neighbours(query.dense().row(i));
    ASSERT_EQ(nb.size(), 1u);
    EXPECT_EQ(scores[i], static_cast<double>(train.labels[nb[0]]));
  }
}

TEST(Models, KnnConstantLabelPredictsThatLabel) {
  std::mt19937_64 rng(3);
  auto train = toy_dense(rng, 10, 3);
  std::fill(train.labels.begin(), train.labels.end(), 1);
  auto m = build_model(KnnSpec{3});
  m->fit(train, train, quick());
  for (int y : m->predict_labels(toy_dense(rng, 8, 3))) EXPECT_EQ(y, 1);
}

TEST(Models, SingleClassRejectedForDiscriminativeModels) {
  std::mt19937_64 rng(3);
  auto train = toy_dense(rng, 10, 3);
  std::fill(train.labels.begin(), train.labels.end(), 0);
  EXPECT_THROW(build_model(LinearSvmSpec{})->fit(train, train, quick()), Error);
  EXPECT_THROW(build_model(RandomForestSpec{})->fit(train, train, quick()), Error);
}

TEST(Models, EmptyAndMismatchedInputsThrow) {
  std::mt19937_64 rng(4);
  const auto ds = toy_dense(rng, 10, 3);
  EncodedDataset empty;
  empty.payload = DenseMatrix(0, 3);
  EXPECT_THROW(build_model(LinearSvmSpec{})->fit(empty, empty, quick()), Error);
  auto svm = build_model(LinearSvmSpec{});
  svm->fit(ds, ds, quick());
  EXPECT_TRUE(svm->predict_labels(empty).empty());
  EXPECT_THROW(svm->predict_scores(toy_dense(rng, 3, 5)), Error);
  EXPECT_THROW(svm->predict_scores(testsupport::toy_tokens(rng, 3, 5, 4)), Error);
}

TEST(Models, SpecValidation) {
  AeClassifierSpec ae;
  ae.lambda1 = 0.0;
  EXPECT_THROW(validate_spec(ae), ConfigError);
  EXPECT_THROW(validate_spec(KnnSpec{0}), ConfigError);
  EXPECT_NO_THROW(validate_spec(GnnSpec{}));
  EXPECT_THROW(spec_from_json(nlohmann::json{{"family", "knn"}, {"kk", 3}}), ConfigError);
  EXPECT_THROW(spec_from_json(nlohmann::json{{"family", "nope"}}), ConfigError);
}

TEST(Models, SpecJsonRoundTripAndOverrides) {
  const std::vector<ModelSpec> specs{LinearSvmSpec{}, KernelSvmSpec{},    KnnSpec{},  RandomForestSpec{},
                                     MultimodalMlpSpec{}, AttentionMlpSpec{}, MlpSpec{}, LstmSpec{},
                                     CnnSpec{},       AeClassifierSpec{}, GnnSpec{}};
  for (const auto& s : specs) EXPECT_EQ(spec_to_json(spec_from_json(spec_to_json(s))), spec_to_json(s));
  const auto knn = apply_overrides(KnnSpec{3}, nlohmann::json{{"k", 7}});
  EXPECT_EQ(std::get<KnnSpec>(knn).k, 7);
  EXPECT_THROW(apply_overrides(KnnSpec{3}, nlohmann::json{{"C", 1.0}}), ConfigError);
}

TEST(Models, ScaledWidth) {
  EXPECT_EQ(scaled_width(128, 1.0), 128u);
  EXPECT_EQ(scaled_width(128, 10.0), 13u);
  EXPECT_EQ(scaled_width(20, 10.0), 8u);
  EXPECT_EQ(scaled_width(4, 10.0), 4u);
  EXPECT_THROW(scaled_width(10, 0.5), Error);
}

TEST(Models, CnnParameterCount) {
  std::mt19937_64 rng(5);
  CnnSpec spec;
  spec.vocab = 8;
  CnnModel cnn(spec, 1.0);
  cnn.prepare(testsupport::toy_one_hot(rng, 4, 8, 20), 1);
  const std::size_t fc = spec.fc, F = spec.filters;
  EXPECT_EQ(cnn.parameter_count(), 8 * 7 * F + F + F * fc + fc + fc + 1);
}

TEST(Models, LinearSvmSeparatesWithMargin) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = separable_2d(rng, 200, 0.3);
    LinearSvm svm(LinearSvmSpec{});
    svm.fit(ds, ds, quick());
    EXPECT_EQ(training_accuracy(svm, ds), 1.0);
    const auto scores = svm.predict_scores(ds);
    for (std::size_t i = 0; i < ds.rows(); ++i) EXPECT_EQ(scores[i] > 0.0, ds.labels[i] == 1);
  }
}

TEST(Models, PerfectSeparationForForestAndKnn) {
  std::mt19937_64 rng(7);
  const auto ds = separable_2d(rng, 150, 0.3);
  for (const ModelSpec& spec : {ModelSpec{RandomForestSpec{25, 0, 3}}, ModelSpec{KnnSpec{1}}}) {
    auto m = build_model(spec);
    m->fit(ds, ds, quick());
    EXPECT_EQ(training_accuracy(*m, ds), 1.0) << m->family();
  }
}

TEST(Models, KernelSvmSatisfiesKkt) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 8; ++trial) {
    auto ds = separable_2d(rng, 60, trial % 2 ? 0.0 : 0.2);
    if (trial % 2) {
      for (std::size_t i = 0; i < ds.rows(); i += 7) ds.labels[i] = 1 - ds.labels[i];
    }
    const auto k = linear_kernel(ds);
    KernelSvmSpec spec;
    spec.C = 1.0;
    spec.tol = 1e-6;
    KernelSvm svm(spec);
    svm.fit(k, k, quick());
    const auto& a = svm.alpha();
    const auto& y = svm.signed_labels();
    double balance = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(a[i], -1e-12);
      EXPECT_LE(a[i], spec.C + 1e-12);
      balance += a[i] * y[i];
    }
    EXPECT_NEAR(balance, 0.0, 1e-9);
    const auto f = svm.predict_scores(k);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double margin = y[i] * f[i];
      if (a[i] < 1e-8) EXPECT_GE(margin, 1.0 - 1e-3);
      else if (a[i] > spec.C - 1e-8) EXPECT_LE(margin, 1.0 + 1e-3);
      else EXPECT_NEAR(margin, 1.0, 1e-3);
    }
  }
}

TEST(Models, FiniteDifferenceOnTinyMlp) {
  std::mt19937_64 rng(9);
  const auto ds = toy_dense(rng, 12, 6);
  Mlp mlp(MlpSpec{{8, 8}}, 1.0);
  EXPECT_LE(finite_difference_check(mlp, ds, 1e-5, 20, 1), 1e-3);
}

TEST(Models, FiniteDifferenceOnZeroNetworkIsExact) {
  EncodedDataset ds;
  ds.payload = DenseMatrix(6, 4, 0.0);
  ds.labels.assign(6, 1);
  for (int i = 0; i < 6; ++i) ds.app_ids.push_back("z" + std::to_string(i));
  Mlp mlp(MlpSpec{{5}}, 1.0);
  mlp.prepare(ds, 1);
  auto& store = mlp.parameters();
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (auto& v : store.at(p).value.data) v = 0.0;
  }
  EXPECT_LE(finite_difference_check(mlp, ds, 1e-5, 1000, 1), 1e-9);
}

TEST(Models, FiniteDifferenceNotApplicableToKnn) {
  std::mt19937_64 rng(10);
  const auto ds = toy_dense(rng, 6, 3);
  Knn knn(KnnSpec{1});
  try {
    finite_difference_check(knn, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("not applicable"), std::string::npos);
  }
}

TEST(Models, TrainingIsDeterministic) {
  std::mt19937_64 rng(11);
  const auto ds = toy_dense(rng, 40, 5);
  for (const ModelSpec& spec : {ModelSpec{MlpSpec{{6}}}, ModelSpec{RandomForestSpec{10, 0, 2}},
                                ModelSpec{AttentionMlpSpec{5, 2, 6}}}) {
    auto a = build_model(spec);
    auto b = build_model(spec);
    a->fit(ds, ds, quick());
    b->fit(ds, ds, quick());
    EXPECT_EQ(a->state(), b->state()) << a->family();
    EXPECT_EQ(a->predict_scores(ds), b->predict_scores(ds)) << a->family();
  }
}

TEST(Models, FlatValidationStopsEarly) {
  std::mt19937_64 rng(12);
  const auto train = toy_dense(rng, 30, 4);
  MlpSpec spec{{6}};
  spec.lr = 1e-12;
  auto m = build_model(spec);
  TrainConfig cfg = quick(30);
  cfg.patience = 3;
  m->fit(train, train, cfg);
  EXPECT_LT(m->training_log().size(), 30u);
}

TEST(Models, ThresholdOneMakesSigmoidScoresBenign) {
  std::mt19937_64 rng(13);
  const auto ds = toy_dense(rng, 20, 4);
  auto m = build_model(MlpSpec{{6}});
  m->fit(ds, ds, quick());
  for (int y : m->predict_labels(ds, 1.0)) EXPECT_EQ(y, 0);
  for (double s : m->predict_scores(ds)) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Models, GnnScoresEmptySampleZero) {
  std::mt19937_64 rng(14);
  auto ds = testsupport::toy_graphs(rng, 10, 4);
  ds.payload = [&] {
    auto b = ds.graphs();
    b.samples[5].subgraphs.clear();
    return b;
  }();
  auto m = build_model(GnnSpec{2, 6, 1, 5});
  m->fit(ds, ds, quick(2));
  EXPECT_EQ(m->predict_scores(ds)[5], 0.0);
}

TEST(Models, CheckpointRoundTripForEveryFamily) {
  testsupport::TempDir dir;
  std::mt19937_64 rng(15);
  const auto dense = toy_dense(rng, 24, 6, true, {0, 3, 6});
  const auto tokens = testsupport::toy_tokens(rng, 24, 6, 10);
  const auto images = testsupport::toy_one_hot(rng, 24, 8, 12);
  const auto graphs = testsupport::toy_graphs(rng, 24, 4);
  const auto kernel = linear_kernel(toy_dense(rng, 24, 4));
  struct Case {
    ModelSpec spec;
    const EncodedDataset* ds;
  };
  CnnSpec cnn{8, 4, 3, 4};
  const std::vector<Case> cases{{LinearSvmSpec{}, &dense},
                                {KernelSvmSpec{}, &kernel},
                                {KnnSpec{3}, &dense},
                                {RandomForestSpec{5, 3, 1}, &dense},
                                {MultimodalMlpSpec{{6, 4}, {5, 3}}, &dense},
                                {AttentionMlpSpec{5, 2, 6}, &dense},
                                {MlpSpec{{6}}, &dense},
                                {LstmSpec{1, 4, 5}, &tokens},
                                {cnn, &images},
                                {AeClassifierSpec{2, 2, 2, 6}, &dense},
                                {GnnSpec{2, 6, 1, 5}, &graphs}};
  for (const auto& c : cases) {
    auto m = build_model(c.spec, 2.0);
    m->fit(*c.ds, *c.ds, quick(2));
    save_checkpoint(*m, 2.0, dir.file("m.ckpt"));
    const auto back = load_checkpoint(dir.file("m.ckpt"));
    EXPECT_EQ(back->family(), m->family());
    EXPECT_EQ(back->predict_scores(*c.ds), m->predict_scores(*c.ds)) << m->family();
  }
  EXPECT_THROW(load_checkpoint(dir.file("missing.ckpt")), Error);
}
