#include "mdbench/models.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "mdbench/error.hpp"
#include "mdbench/forest.hpp"
#include "mdbench/linear_models.hpp"
#include "mdbench/neural.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Specs

namespace {

template <typename T>
struct Family;
template <> struct Family<LinearSvmSpec> { static constexpr std::string_view name = "linear_svm"; };
template <> struct Family<KernelSvmSpec> { static constexpr std::string_view name = "kernel_svm"; };
template <> struct Family<KnnSpec> { static constexpr std::string_view name = "knn"; };
template <> struct Family<RandomForestSpec> { static constexpr std::string_view name = "random_forest"; };
template <> struct Family<MultimodalMlpSpec> { static constexpr std::string_view name = "mlp_multimodal"; };
template <> struct Family<AttentionMlpSpec> { static constexpr std::string_view name = "attention_mlp"; };
template <> struct Family<MlpSpec> { static constexpr std::string_view name = "mlp"; };
template <> struct Family<LstmSpec> { static constexpr std::string_view name = "lstm"; };
template <> struct Family<CnnSpec> { static constexpr std::string_view name = "cnn"; };
template <> struct Family<AeClassifierSpec> { static constexpr std::string_view name = "ae_classifier"; };
template <> struct Family<GnnSpec> { static constexpr std::string_view name = "gnn"; };

// Field visitor shared by JSON conversion in both directions.
template <typename F> void fields(LinearSvmSpec& s, F&& f) { f("C", s.C); f("max_iter", s.max_iter); f("tol", s.tol); }
template <typename F> void fields(KernelSvmSpec& s, F&& f) { f("C", s.C); f("max_iter", s.max_iter); f("tol", s.tol); }
template <typename F> void fields(KnnSpec& s, F&& f) { f("k", s.k); }
template <typename F> void fields(RandomForestSpec& s, F&& f) {
  f("n_trees", s.n_trees); f("max_depth", s.max_depth); f("seed", s.seed);
}
template <typename F> void fields(MultimodalMlpSpec& s, F&& f) {
  f("tower_layers", s.tower_layers); f("merge_layers", s.merge_layers); f("lr", s.lr); f("batch", s.batch);
}
template <typename F> void fields(AttentionMlpSpec& s, F&& f) {
  f("attn_hidden", s.attn_hidden); f("mlp_layers", s.mlp_layers); f("hidden", s.hidden); f("lr", s.lr);
  f("batch", s.batch);
}
template <typename F> void fields(MlpSpec& s, F&& f) { f("hidden", s.hidden); f("lr", s.lr); f("batch", s.batch); }
template <typename F> void fields(LstmSpec& s, F&& f) {
  f("layers", s.layers); f("embed", s.embed); f("hidden", s.hidden); f("lr", s.lr); f("batch", s.batch);
}
template <typename F> void fields(CnnSpec& s, F&& f) {
  f("vocab", s.vocab); f("filters", s.filters); f("kernel", s.kernel); f("fc", s.fc); f("lr", s.lr);
  f("batch", s.batch);
}
template <typename F> void fields(AeClassifierSpec& s, F&& f) {
  f("enc_layers", s.enc_layers); f("dec_layers", s.dec_layers); f("clf_layers", s.clf_layers);
  f("hidden", s.hidden); f("lr", s.lr); f("batch", s.batch); f("epochs", s.epochs);
  f("recon_target", s.recon_target); f("lambda1", s.lambda1); f("lambda2", s.lambda2); f("lambda3", s.lambda3);
}
template <typename F> void fields(GnnSpec& s, F&& f) {
  f("layers", s.layers); f("hidden", s.hidden); f("fc_layers", s.fc_layers); f("fc_hidden", s.fc_hidden);
  f("lr", s.lr); f("batch", s.batch);
}

template <typename T>
void read_fields(T& spec, const json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key == "family") continue;
    bool known = false;
    fields(spec, [&](const char* name, auto& field) {
      if (key != name) return;
      known = true;
      try {
        field = value.template get<std::decay_t<decltype(field)>>();
      } catch (const json::exception&) {
        throw ConfigError("model field '" + key + "' has the wrong type");
      }
    });
    if (!known) throw ConfigError("unknown field '" + key + "' for model family " + std::string(Family<T>::name));
  }
}

ModelSpec default_spec(std::string_view family) {
  ModelSpec out;
  bool found = false;
  auto try_one = [&](auto tag) {
    using T = decltype(tag);
    if (!found && family == Family<T>::name) {
      out = T{};
      found = true;
    }
  };
  try_one(LinearSvmSpec{});
  try_one(KernelSvmSpec{});
  try_one(KnnSpec{});
  try_one(RandomForestSpec{});
  try_one(MultimodalMlpSpec{});
  try_one(AttentionMlpSpec{});
  try_one(MlpSpec{});
  try_one(LstmSpec{});
  try_one(CnnSpec{});
  try_one(AeClassifierSpec{});
  try_one(GnnSpec{});
  if (!found) throw ConfigError("unknown model family '" + std::string(family) + "'");
  return out;
}

}  // namespace

std::string_view family_name(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return Family<std::decay_t<decltype(s)>>::name; }, spec);
}

void validate_spec(const ModelSpec& spec) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("invalid " + std::string(family_name(spec)) + " spec: " + why);
  };
  auto positive = [&](const char* name, double v) {
    if (!(v > 0)) fail(std::string(name) + " must be positive");
  };
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearSvmSpec> || std::is_same_v<T, KernelSvmSpec>) {
          positive("C", s.C);
          positive("max_iter", s.max_iter);
          positive("tol", s.tol);
        } else if constexpr (std::is_same_v<T, KnnSpec>) {
          positive("k", s.k);
        } else if constexpr (std::is_same_v<T, RandomForestSpec>) {
          positive("n_trees", s.n_trees);
          if (s.max_depth < 0) fail("max_depth must be >= 0");
        } else if constexpr (std::is_same_v<T, MultimodalMlpSpec>) {
          if (s.tower_layers.empty() || s.merge_layers.empty()) fail("layer lists must be non-empty");
          for (auto w : s.tower_layers) positive("tower width", static_cast<double>(w));
          for (auto w : s.merge_layers) positive("merge width", static_cast<double>(w));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        } else if constexpr (std::is_same_v<T, AttentionMlpSpec>) {
          positive("attn_hidden", static_cast<double>(s.attn_hidden));
          positive("mlp_layers", static_cast<double>(s.mlp_layers));
          positive("hidden", static_cast<double>(s.hidden));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        } else if constexpr (std::is_same_v<T, MlpSpec>) {
          for (auto w : s.hidden) positive("hidden width", static_cast<double>(w));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        } else if constexpr (std::is_same_v<T, LstmSpec>) {
          positive("layers", static_cast<double>(s.layers));
          positive("embed", static_cast<double>(s.embed));
          positive("hidden", static_cast<double>(s.hidden));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        } else if constexpr (std::is_same_v<T, CnnSpec>) {
          positive("vocab", static_cast<double>(s.vocab));
          positive("filters", static_cast<double>(s.filters));
          positive("kernel", static_cast<double>(s.kernel));
          positive("fc", static_cast<double>(s.fc));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        } else if constexpr (std::is_same_v<T, AeClassifierSpec>) {
          positive("enc_layers", static_cast<double>(s.enc_layers));
          positive("dec_layers", static_cast<double>(s.dec_layers));
          positive("clf_layers", static_cast<double>(s.clf_layers));
          positive("hidden", static_cast<double>(s.hidden));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
          if (s.epochs < 0) fail("epochs must be >= 0");
          positive("recon_target", s.recon_target);
          positive("lambda1", s.lambda1);
          positive("lambda2", s.lambda2);
          positive("lambda3", s.lambda3);
        } else if constexpr (std::is_same_v<T, GnnSpec>) {
          positive("layers", static_cast<double>(s.layers));
          positive("hidden", static_cast<double>(s.hidden));
          positive("fc_layers", static_cast<double>(s.fc_layers));
          positive("fc_hidden", static_cast<double>(s.fc_hidden));
          positive("lr", s.lr);
          positive("batch", static_cast<double>(s.batch));
        }
      },
      spec);
}

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = std::string(family_name(spec));
  std::visit(
      [&](auto s) {
        fields(s, [&](const char* name, const auto& field) { j[name] = field; });
      },
      spec);
  return j;
}

ModelSpec spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    throw ConfigError("model spec needs a string 'family'");
  }
  return apply_overrides(default_spec(j["family"].get<std::string>()), j);
}

ModelSpec apply_overrides(const ModelSpec& spec, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("model overrides must be a table");
  if (overrides.contains("family") && overrides["family"] != std::string(family_name(spec))) {
    throw ConfigError("override family does not match model family " + std::string(family_name(spec)));
  }
  ModelSpec out = spec;
  std::visit([&](auto& s) { read_fields(s, overrides); }, out);
  validate_spec(out);
  return out;
}

std::size_t scaled_width(std::size_t w, double factor) {
  if (factor < 1.0) throw Error("desk scale factor must be >= 1");
  const auto divided = static_cast<std::size_t>(std::ceil(static_cast<double>(w) / factor));
  return std::max(std::min<std::size_t>(w, 8), divided);
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (cfg.desk_scale_factor < 1.0) throw ConfigError("desk_scale_factor must be >= 1");
}

// ---------------------------------------------------------------------------
// Model

void Model::require_fitted() const {
  if (!fitted_) throw Error(std::string(family()) + ": model is not fitted");
}

void Model::check_input(const EncodedDataset& ds) const {
  if (!accepts(ds.kind)) {
    throw Error(std::string(family()) + ": cannot consume " + std::string(to_string(ds.kind)) + " input");
  }
  if (ds.labels.size() != ds.app_ids.size()) throw Error("encoded dataset has mismatched row metadata");
}

void Model::fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) {
  validate_train_config(cfg);
  check_input(train);
  if (val.rows() > 0) check_input(val);
  if (train.rows() == 0) throw Error(std::string(family()) + ": empty training set");
  bool pos = false, neg = false;
  for (const auto* ds : {&train, &val}) {
    for (int y : ds->labels) {
      if (y != 0 && y != 1) throw Error("labels must be binary");
    }
  }
  for (int y : train.labels) (y == 1 ? pos : neg) = true;
  if (!(pos && neg) && !allows_single_class()) {
    throw Error(std::string(family()) + ": training set holds a single class");
  }
  log_.clear();
  fitted_ = false;
  do_fit(train, val, cfg);
  fitted_ = true;
}

std::vector<int> Model::predict_labels(const EncodedDataset& ds, std::optional<double> threshold) const {
  const double t = threshold.value_or(default_threshold());
  std::vector<int> out;
  for (double s : predict_scores(ds)) out.push_back(s > t ? 1 : 0);
  return out;
}

void Model::write_training_log(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log: " + path);
  out << "epoch,phase,train_loss,val_f1\n";
  char buf[128];
  for (const auto& e : log_) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g\n", e.epoch, e.phase.c_str(), e.train_loss, e.val_f1);
    out << buf;
  }
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, double scale) {
  validate_spec(spec);
  if (scale < 1.0) throw ConfigError("desk scale factor must be >= 1");
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<Model> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LinearSvmSpec>) return std::make_unique<LinearSvm>(s);
        if constexpr (std::is_same_v<T, KernelSvmSpec>) return std::make_unique<KernelSvm>(s);
        if constexpr (std::is_same_v<T, KnnSpec>) return std::make_unique<Knn>(s);
        if constexpr (std::is_same_v<T, RandomForestSpec>) return std::make_unique<RandomForest>(s);
        if constexpr (std::is_same_v<T, MultimodalMlpSpec>) return std::make_unique<MultimodalMlp>(s, scale);
        if constexpr (std::is_same_v<T, AttentionMlpSpec>) return std::make_unique<AttentionMlp>(s, scale);
        if constexpr (std::is_same_v<T, MlpSpec>) return std::make_unique<Mlp>(s, scale);
        if constexpr (std::is_same_v<T, LstmSpec>) return std::make_unique<LstmModel>(s, scale);
        if constexpr (std::is_same_v<T, CnnSpec>) return std::make_unique<CnnModel>(s, scale);
        if constexpr (std::is_same_v<T, AeClassifierSpec>) return std::make_unique<AeClassifier>(s, scale);
        if constexpr (std::is_same_v<T, GnnSpec>) return std::make_unique<GnnModel>(s, scale);
      },
      spec);
}

// ---------------------------------------------------------------------------
// Gradient check

double finite_difference_check(Model& model, const EncodedDataset& ds, double epsilon, std::size_t max_params,
                               std::uint64_t seed) {
  auto* net = dynamic_cast<NeuralModel*>(&model);
  if (!net) throw Error("finite_difference_check: not applicable to " + std::string(model.family()));
  if (ds.rows() == 0) throw Error("finite_difference_check: empty dataset");
  if (!net->prepared()) net->prepare(ds, seed);

  std::vector<std::size_t> rows(std::min<std::size_t>(ds.rows(), 16));
  std::iota(rows.begin(), rows.end(), 0);
  auto& store = net->parameters();
  auto loss_at = [&] {
    nn::Tape tape(&store);
    return tape.scalar(net->objective(tape, ds, rows));
  };

  store.zero_grad();
  {
    nn::Tape tape(&store);
    tape.backward(net->objective(tape, ds, rows));
  }
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (std::size_t j = 0; j < store.at(p).value.data.size(); ++j) slots.emplace_back(p, j);
  }
  Rng rng(mix_seed(seed, 0xfd));
  double worst = 0.0;
  for (auto k : rng.sample_indices(slots.size(), std::min(max_params, slots.size()))) {
    const auto [p, j] = slots[k];
    double& v = store.at(p).value.data[j];
    const double analytic = store.at(p).grad.data[j];
    const double orig = v;
    v = orig + epsilon;
    const double up = loss_at();
    v = orig - epsilon;
    const double down = loss_at();
    v = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'D', 'B', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kCheckpointVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw Error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

void save_checkpoint(const Model& model, double scale, const std::string& path) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(out, kCheckpointVersion);
  const std::string spec = spec_to_json(model.spec()).dump();
  put_u64(out, spec.size());
  out += spec;
  put_u64(out, std::bit_cast<std::uint64_t>(scale));
  const auto state = model.state();
  put_u64(out, state.size());
  for (const auto& m : state) {
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    for (double v : m.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint: " + path);
  f << out;
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint: " + path);
  const std::string in(std::istreambuf_iterator<char>(f), {});
  if (in.size() < sizeof kCheckpointMagic || in.compare(0, sizeof kCheckpointMagic, kCheckpointMagic, 8) != 0) {
    throw Error("not a checkpoint file: " + path);
  }
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = get_u64(in, pos);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto spec_len = get_u64(in, pos);
  if (pos + spec_len > in.size()) throw Error("truncated checkpoint");
  const auto spec = spec_from_json(json::parse(in.substr(pos, spec_len)));
  pos += spec_len;
  const double scale = std::bit_cast<double>(get_u64(in, pos));
  auto model = build_model(spec, scale);
  std::vector<DenseMatrix> state(get_u64(in, pos));
  for (auto& m : state) {
    m.rows = get_u64(in, pos);
    m.cols = get_u64(in, pos);
    m.data.resize(m.rows * m.cols);
    for (auto& v : m.data) v = std::bit_cast<double>(get_u64(in, pos));
  }
  if (pos != in.size()) throw Error("trailing bytes in checkpoint");
  model->load_state(state);
  return model;
}

}  // namespace mdbench
