#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdbench/encoded.hpp"
#include "mdbench/metrics.hpp"
#include "mdbench/models.hpp"
#include "mdbench/record.hpp"

namespace mdbench {

class Mlp;

enum class ObfuscationKind { rename_identifiers, encrypt_resources, modify_code, reflect_invocation };

std::string_view to_string(ObfuscationKind kind);
ObfuscationKind parse_obfuscation_kind(std::string_view text);

inline constexpr std::string_view kReflectionApi = "reflect::invoke";
inline constexpr std::string_view kCryptoApi = "javax.crypto.Cipher.doFinal";

// Feature-level simulation of an obfuscation tool; the label is preserved and
// the output is deterministic under seed. Intensity in (0, 1] is the share of
// affected items (rounded up):
//  rename_identifiers  component names and "id:" code strings get random tokens
//  encrypt_resources   resources become opaque tokens, their "res:" code strings
//                      are dropped, one crypto API call (node + edge) is added
//  modify_code         ceil(intensity*|nodes|) junk internal nodes split random
//                      edges A->B into A->J->B; junk opcode 3-grams are spliced in
//  reflect_invocation  ceil(intensity*#edges into sensitive nodes) such edges are
//                      rerouted to one reflect::invoke node; the target API name
//                      moves into code_strings and its call count drops
FeatureRecord obfuscate(const FeatureRecord& record, ObfuscationKind kind, std::uint64_t seed,
                        double intensity = 1.0);

// Differentiable stand-in for the target detector used to guide JSMA.
class Substitute {
 public:
  virtual ~Substitute() = default;
  virtual std::size_t dim() const = 0;
  virtual double logit(std::span<const double> x) const = 0;  // > 0 means malicious
  virtual std::vector<double> gradient(std::span<const double> x) const = 0;
};

class LinearSubstitute : public Substitute {
 public:
  LinearSubstitute(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {}
  std::size_t dim() const override { return w_.size(); }
  double logit(std::span<const double> x) const override;
  std::vector<double> gradient(std::span<const double> x) const override;

 private:
  std::vector<double> w_;
  double b_;
};

class MlpSubstitute : public Substitute {
 public:
  explicit MlpSubstitute(std::unique_ptr<Mlp> model);
  ~MlpSubstitute() override;
  std::size_t dim() const override;
  double logit(std::span<const double> x) const override;
  std::vector<double> gradient(std::span<const double> x) const override;
  const Mlp& model() const { return *model_; }

 private:
  std::unique_ptr<Mlp> model_;
};

// Two-layer network (hidden 128 before desk scaling) trained on binary
// features with early stopping on a seeded 10% hold-out. Throws Error on an
// empty set or non-binary values.
std::unique_ptr<MlpSubstitute> train_substitute(const EncodedDataset& train, std::uint64_t seed,
                                                double desk_scale = 10.0, int max_epochs = 30);

struct JsmaResult {
  std::vector<double> x;
  int flips = 0;
  bool success = false;  // substitute logit <= 0 at the end
};

// Greedy addition-only saliency attack: while the substitute says malicious
// and flips < budget, set the 0-feature with the most negative gradient to 1.
// Stops early when no 0-feature has negative gradient. Throws for budget < 1.
JsmaResult jsma_attack(const Substitute& substitute, std::span<const double> x, int budget);

// Sets ceil(fraction * #zeros) uniformly chosen 0-features to 1.
std::vector<double> randomized_input(std::span<const double> x, double fraction, std::uint64_t seed);

enum class AttackKind { jsma, randomized_input };
std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view text);

struct AttackSpec {
  AttackKind kind = AttackKind::jsma;
  int budget = 0;          // 0 = max(50, 1% of the feature count)
  double fraction = 0.05;  // randomized input
  std::uint64_t seed = 1;
};

int default_budget(std::size_t n_features);

struct AttackOutcome {
  std::int64_t n_total = 0;
  std::int64_t n_success = 0;
  std::vector<int> flips_per_success;
  std::int64_t features_total = 0;
  std::int64_t removed_features = 0;  // 1 -> 0 changes seen by the audit; always 0
  int budget = 0;

  double asr() const;
  MetricValue apr() const;  // undefined (0) without successes
};

// Target decision on feature rows: 1 = malicious.
using TargetPredict = std::function<std::vector<int>(const DenseMatrix&)>;

// Runs the attack on every malicious row the target initially detects and
// counts those whose adversarial version the target labels benign.
AttackOutcome evaluate_attack(const TargetPredict& target, const Substitute* substitute,
                              const DenseMatrix& malicious_rows, const AttackSpec& spec);

bool is_binary(const DenseMatrix& m);

}  // namespace mdbench
