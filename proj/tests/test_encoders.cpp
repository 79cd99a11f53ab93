#include <gtest/gtest.h>

#include <random>

#include "mdbench/encoders.hpp"
#include "mdbench/error.hpp"
#include "mdbench/synth.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace mdbench;
using testsupport::make_record;

namespace {

GraphNode internal(std::int64_t id) { return {id, NodeKind::internal, std::nullopt, false}; }
GraphNode external(std::int64_t id, const std::string& api, bool sensitive) {
  return {id, NodeKind::external_api, api, sensitive};
}

FeatureRecord graph_record(std::vector<GraphNode> nodes, std::vector<Edge> edges) {
  FeatureRecord r;
  r.app_id = "g";
  r.label = Label::benign;
  r.vt_positives = 0;
  r.graph.nodes = std::move(nodes);
  r.graph.edges = std::move(edges);
  for (const auto& n : r.graph.nodes) {
    if (n.api_name) r.code.api_calls[*n.api_name] += 1;
  }
  return r;
}

const SensitiveApiCatalog kCatalog = testsupport::test_catalog();
const std::string& sensitive(std::size_t i) { return kCatalog.apis()[i]; }

std::vector<FeatureRecord> synth_records(std::size_t n, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_apps = n;
  spec.malware_ratio = 0.3;
  spec.seed = seed;
  spec.opcode_len_range = {16, 64};
  return generate(spec).records;
}

}  // namespace

TEST(Encoders, DrebinPresenceBits) {
  BinaryFeatureEncoder enc({FeatureCategory::permission});
  std::vector<FeatureRecord> train{make_record("x", Label::benign, 2012, {"A", "B"}, {})};
  enc.fit(train);
  EXPECT_EQ(enc.vocabulary(), (std::vector<std::string>{"perm::A", "perm::B"}));
  EXPECT_EQ(enc.transform_one(make_record("y", Label::benign, 2012, {"A"}, {})), (std::vector<double>{1, 0}));
  EXPECT_EQ(enc.transform_one(make_record("y", Label::benign, 2012, {}, {})), (std::vector<double>{0, 0}));
  EXPECT_EQ(enc.transform_one(make_record("y", Label::benign, 2012, {"A", "C"}, {})), (std::vector<double>{1, 0}));
}

TEST(Encoders, TransformBeforeFitThrows) {
  auto enc = BinaryFeatureEncoder::drebin();
  std::vector<FeatureRecord> rs{make_record("y", Label::benign, 2012, {}, {})};
  EXPECT_THROW(enc->transform(rs), Error);
  TokenSequenceEncoder tok(8);
  EXPECT_THROW(tok.transform(rs), Error);
}

TEST(Encoders, XmalUsesPermissionsAndApis) {
  auto enc = BinaryFeatureEncoder::xmal();
  std::vector<FeatureRecord> train{make_record("x", Label::benign, 2012, {"A"}, {{"f", 1}})};
  train[0].manifest.intents.insert("i");
  enc->fit(train);
  EXPECT_EQ(enc->vocabulary(), (std::vector<std::string>{"api::f", "perm::A"}));
  EXPECT_EQ(enc->transform_one(train[0]), (std::vector<double>{1, 1}));
  EXPECT_EQ(enc->transform_one(make_record("y", Label::benign, 2012, {"A"}, {})), (std::vector<double>{0, 1}));
  EXPECT_EQ(enc->transform_one(make_record("y", Label::benign, 2012, {}, {{"g", 1}})), (std::vector<double>{0, 0}));
}

TEST(Encoders, RamdaAddsIntents) {
  auto enc = BinaryFeatureEncoder::ramda();
  std::vector<FeatureRecord> train{make_record("x", Label::benign, 2012, {"A"}, {{"f", 1}})};
  train[0].manifest.intents.insert("i");
  train[0].manifest.hardware.insert("h");
  enc->fit(train);
  EXPECT_EQ(enc->vocabulary(), (std::vector<std::string>{"api::f", "intent::i", "perm::A"}));
}

TEST(Encoders, BinaryEncodingNeverMutatesAndIsBinary) {
  const auto rs = synth_records(80, 3);
  const auto copy = rs;
  auto enc = BinaryFeatureEncoder::drebin();
  enc->fit(std::span(rs).subspan(0, 40));
  const auto ds = enc->transform(rs);
  EXPECT_EQ(rs, copy);
  EXPECT_EQ(ds.dense().cols, enc->size());
  for (double v : ds.dense().data) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_EQ(enc->shape(), "dense[" + std::to_string(enc->size()) + "]");
}

TEST(Encoders, MamaDroidFlattened) {
  const auto& fam = graph::FamilyAbstraction::default_families();
  const auto r = graph_record(
      {internal(0), external(1, "android.a1.B.c", false), external(2, "android.a2.B.d", false),
       external(3, "java.util.List.size", false)},
      {{0, 1}, {0, 2}, {0, 3}});
  const auto v = encode_mamadroid(r, fam);
  const std::size_t F = fam.size();
  ASSERT_EQ(v.size(), F * F);
  const auto self = fam.family_index(std::nullopt);
  EXPECT_NEAR(v[self * F + fam.family_index(std::string("android.x"))], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(v[self * F + fam.family_index(std::string("java.x"))], 1.0 / 3.0, 1e-12);
  for (double x : encode_mamadroid(graph_record({internal(0)}, {}), fam)) EXPECT_EQ(x, 0.0);
  const auto loops = encode_mamadroid(graph_record({external(0, "android.v.W.x", false)}, {{0, 0}, {0, 0}}), fam);
  EXPECT_EQ(std::count(loops.begin(), loops.end(), 1.0), 1);
}

TEST(Encoders, MamaDroidRowsSumToOneOrZero) {
  const auto& fam = graph::FamilyAbstraction::default_families();
  for (const auto& r : synth_records(60, 5)) {
    const auto v = encode_mamadroid(r, fam);
    for (std::size_t row = 0; row < fam.size(); ++row) {
      double s = 0.0;
      for (std::size_t c = 0; c < fam.size(); ++c) s += v[row * fam.size() + c];
      EXPECT_TRUE(s == 0.0 || std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST(Encoders, OpcodeImage) {
  FeatureRecord r;
  r.code.opcode_seq = {3, 1};
  const auto m = encode_opcode_image(r, 8, 4);
  ASSERT_EQ(m.rows, 4u);
  ASSERT_EQ(m.cols, 8u);
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t v = 0; v < 8; ++v) {
      const double expected = (t == 0 && v == 3) || (t == 1 && v == 1) ? 1.0 : 0.0;
      EXPECT_EQ(m.at(t, v), expected);
    }
  }
  r.code.opcode_seq = {0, 1, 2, 3, 4, 5, 6, 7, 0, 1};
  const auto cut = encode_opcode_image(r, 8, 4);
  EXPECT_EQ(cut.at(3, 3), 1.0);
  r.code.opcode_seq.clear();
  for (double v : encode_opcode_image(r, 8, 4).data) EXPECT_EQ(v, 0.0);
  r.code.opcode_seq = {9};
  EXPECT_THROW(encode_opcode_image(r, 8, 4), Error);
}

TEST(Encoders, OpcodeImageEncoderMatchesDense) {
  const auto rs = synth_records(20, 2);
  OpcodeImageEncoder enc(256, 32);
  enc.fit(rs);
  const auto ds = enc.transform(rs);
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(ds.one_hot().to_dense(i), encode_opcode_image(rs[i], 256, 32));
}

TEST(Encoders, HinDroidKernel) {
  HinDroidEncoder enc;
  std::vector<FeatureRecord> train{make_record("a", Label::benign, 2012, {}, {{"a", 1}, {"b", 1}}),
                                   make_record("b", Label::malicious, 2012, {}, {{"b", 2}})};
  enc.fit(train);
  EXPECT_EQ(enc.incidence(train).data, (std::vector<double>{1, 1, 0, 1}));
  const auto k = enc.transform(train).dense();
  EXPECT_EQ(k.data, (std::vector<double>{2, 1, 1, 1}));
  std::vector<FeatureRecord> disjoint{make_record("c", Label::benign, 2012, {}, {{"x", 1}}),
                                      make_record("d", Label::benign, 2012, {}, {{"y", 1}})};
  enc.fit(disjoint);
  const auto kd = enc.transform(disjoint).dense();
  EXPECT_EQ(kd.at(0, 1), 0.0);
  EXPECT_EQ(kd.at(1, 0), 0.0);
  std::vector<FeatureRecord> same{disjoint[0], disjoint[0], disjoint[0]};
  same[1].app_id = "e";
  same[2].app_id = "f";
  enc.fit(same);
  const auto ks = enc.transform(same);
  for (double v : ks.dense().data) EXPECT_EQ(v, 1.0);
}

TEST(Encoders, HinDroidKernelIsSymmetric) {
  const auto rs = synth_records(40, 7);
  for (bool cosine : {false, true}) {
    HinDroidEncoder enc(cosine);
    enc.fit(rs);
    const auto k = enc.transform(rs).dense();
    ASSERT_EQ(k.rows, rs.size());
    for (std::size_t i = 0; i < k.rows; ++i) {
      for (std::size_t j = 0; j < k.cols; ++j) EXPECT_NEAR(k.at(i, j), k.at(j, i), 1e-12);
      if (cosine) EXPECT_NEAR(k.at(i, i), 1.0, 1e-12);
    }
  }
}

TEST(Encoders, TokenSequences) {
  TokenSequenceEncoder enc(5);
  FeatureRecord a;
  a.code.opcode_seq = {7, 3, 7};
  std::vector<FeatureRecord> train{a};
  enc.fit(train);
  EXPECT_EQ(enc.vocab_size(), 3u);
  EXPECT_EQ(enc.transform_one(a), (std::vector<std::int32_t>{2, 1, 2, 0, 0}));
  FeatureRecord b;
  b.code.opcode_seq = {3, 99};
  EXPECT_EQ(enc.transform_one(b), (std::vector<std::int32_t>{1, 0, 0, 0, 0}));
  EXPECT_EQ(enc.transform_one(FeatureRecord{}), (std::vector<std::int32_t>(5, 0)));
}

TEST(Encoders, MultimodalBlocks) {
  MultimodalEncoder enc;
  auto r = make_record("a", Label::benign, 2012, {"P"}, {{"send", 3}}, {1, 2, 1, 2});
  std::vector<FeatureRecord> train{r};
  enc.fit(train);
  const auto m = enc.transform_one(r);
  ASSERT_EQ(m[2].size(), 1u);
  EXPECT_EQ(m[2][0], 3.0);
  for (const auto& v : enc.transform_one(FeatureRecord{})) {
    for (double x : v) EXPECT_EQ(x, 0.0);
  }
  const auto perms_only = enc.transform_one(make_record("b", Label::benign, 2012, {"P"}, {}));
  int nonzero = 0;
  for (const auto& v : perms_only) nonzero += std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
  EXPECT_EQ(nonzero, 1);
  const auto ds = enc.transform(train);
  ASSERT_EQ(ds.blocks.size(), MultimodalEncoder::kModalities + 1);
  EXPECT_EQ(ds.blocks.back(), ds.dense().cols);
}

TEST(Encoders, MultimodalNgramCap) {
  const auto rs = synth_records(30, 1);
  MultimodalEncoder enc(10);
  enc.fit(rs);
  EXPECT_EQ(enc.widths()[3], 10u);
}

TEST(Encoders, MalScanExamples) {
  const auto path = graph_record({internal(0), external(1, sensitive(0), true), internal(2)}, {{0, 1}, {1, 2}});
  const auto v = encode_malscan(path, kCatalog, graph::CentralityKind::degree);
  ASSERT_EQ(v.size(), kCatalog.size());
  EXPECT_EQ(v[0], 1.0);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_EQ(v[i], 0.0);
  const auto none = graph_record({internal(0), internal(1)}, {{0, 1}});
  for (double x : encode_malscan(none, kCatalog, graph::CentralityKind::harmonic)) EXPECT_EQ(x, 0.0);
  const auto k3 = graph_record({external(0, sensitive(1), true), external(1, sensitive(4), true), internal(2)},
                               {{0, 1}, {1, 2}, {2, 0}});
  const auto kv = encode_malscan(k3, kCatalog, graph::CentralityKind::degree);
  EXPECT_EQ(kv[1], 1.0);
  EXPECT_EQ(kv[4], 1.0);
}

TEST(Encoders, HomDroidExamples) {
  const auto plain = graph_record({internal(0), internal(1)}, {{0, 1}});
  for (double x : encode_homdroid(plain, kCatalog)) EXPECT_EQ(x, 0.0);
  const auto lone = graph_record({internal(0), internal(1), external(2, sensitive(0), true)}, {{0, 1}});
  const auto lv = encode_homdroid(lone, kCatalog);
  ASSERT_EQ(lv.size(), kCatalog.size() + 2);
  EXPECT_EQ(lv[0], 1.0);
  EXPECT_EQ(lv[kCatalog.size()], 0.0);
  EXPECT_EQ(lv[kCatalog.size() + 1], 0.0);
  // Sensitive triangle bridged to a separate non-sensitive triangle.
  const auto two = graph_record({external(0, sensitive(0), true), internal(1), internal(2), internal(3), internal(4),
                                 internal(5)},
                                {{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}, {2, 3}});
  const auto tv = encode_homdroid(two, kCatalog);
  EXPECT_EQ(tv[0], 1.0);
  EXPECT_EQ(tv[kCatalog.size()], 1.0);
}

TEST(Encoders, MsDroidExamples) {
  const auto& fam = graph::FamilyAbstraction::default_families();
  const auto star = graph_record({external(0, sensitive(0), true), internal(1), internal(2), internal(3)},
                                 {{1, 0}, {2, 0}, {3, 0}});
  const auto s = encode_msdroid(star, kCatalog, 1, fam, {});
  ASSERT_EQ(s.subgraphs.size(), 1u);
  EXPECT_EQ(s.subgraphs[0].n_nodes, 4u);
  EXPECT_EQ(s.subgraphs[0].edges.size(), 3u);
  EXPECT_EQ(s.subgraphs[0].features.cols, msdroid_feature_dim(fam, {}));
  EXPECT_TRUE(encode_msdroid(graph_record({internal(0)}, {}), kCatalog, 2, fam, {}).subgraphs.empty());
  const auto pair = graph_record({external(0, sensitive(0), true), internal(1), external(2, sensitive(1), true)},
                                 {{1, 0}, {1, 2}});
  EXPECT_EQ(encode_msdroid(pair, kCatalog, 1, fam, {}).subgraphs.size(), 2u);
}

TEST(Encoders, SdacSingleApiAndEmpty) {
  auto r = make_record("a", Label::benign, 2012, {}, {{"only.api.A.m", 2}});
  std::vector<FeatureRecord> train{r, r};
  train[1].app_id = "b";
  SdacEncoder enc;
  enc.fit(train, 1);
  EXPECT_EQ(enc.clusters(), 1u);
  EXPECT_EQ(enc.transform_one(r), (std::vector<double>{1.0}));
  EXPECT_EQ(enc.transform_one(make_record("c", Label::benign, 2012, {}, {})), (std::vector<double>{0.0}));
}

TEST(Encoders, SdacSplitsAcrossClusters) {
  const auto rs = synth_records(40, 9);
  SdacOptions opt;
  opt.max_clusters = 4;
  SdacEncoder enc(opt);
  enc.fit(rs, 2);
  ASSERT_GE(enc.clusters(), 2u);
  std::string first, second;
  for (const auto& [api, c] : enc.assignment()) {
    if (first.empty()) first = api;
    else if (c != enc.assignment().at(first)) second = api;
  }
  ASSERT_FALSE(second.empty());
  const auto v = enc.transform_one(make_record("z", Label::benign, 2012, {}, {{first, 1}, {second, 1}}));
  EXPECT_EQ(v[enc.assignment().at(first)], 0.5);
  EXPECT_EQ(v[enc.assignment().at(second)], 0.5);
}

TEST(Encoders, EncodedCacheRoundTrip) {
  testsupport::TempDir dir;
  const auto rs = synth_records(30, 4);
  std::vector<std::unique_ptr<Encoder>> encoders;
  encoders.push_back(BinaryFeatureEncoder::drebin());
  encoders.push_back(std::make_unique<TokenSequenceEncoder>(64));
  encoders.push_back(std::make_unique<OpcodeImageEncoder>(256, 32));
  encoders.push_back(std::make_unique<MsDroidEncoder>(generate(SynthSpec{}).catalog, 1));
  for (auto& enc : encoders) {
    enc->fit(rs, 1);
    auto ds = enc->transform(rs);
    attach_labels(ds, rs);
    save_encoded(ds, dir.file("c.bin"));
    EXPECT_EQ(load_encoded(dir.file("c.bin")), ds) << enc->shape();
  }
}

TEST(Encoders, DimensionsStableAcrossInputs) {
  const auto train = synth_records(50, 1);
  const auto other = synth_records(30, 2);
  auto enc = BinaryFeatureEncoder::ramda();
  enc->fit(train);
  EXPECT_EQ(enc->transform(other).dense().cols, enc->size());
  MultimodalEncoder mm;
  mm.fit(train);
  EXPECT_EQ(mm.transform(other).dense().cols, mm.transform(train).dense().cols);
}
