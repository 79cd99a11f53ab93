#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdbench/record.hpp"

namespace mdbench {

// Knobs for the synthetic corpus. Malicious apps carry a planted signature:
// a set of permissions, sensitive-API call motifs and opcode 3-grams. Each
// later year, every signature slot is replaced by a fresh feature with
// probability `drift_strength`, at a uniformly drawn month of that year.
struct SynthSpec {
  std::size_t n_apps = 2000;
  double malware_ratio = 0.1;
  double grayware_ratio = 0.0;
  std::int32_t year_from = 2011;
  std::int32_t year_to = 2020;
  double drift_strength = 0.0;

  std::size_t n_permissions = 120;
  std::size_t n_apis = 400;
  std::size_t n_sensitive = 60;
  std::pair<std::size_t, std::size_t> graph_size_range{10, 30};    // internal methods
  std::pair<std::size_t, std::size_t> opcode_len_range{64, 256};
  std::int32_t opcode_vocab = 256;

  std::size_t signature_permissions = 6;
  std::size_t signature_apis = 6;
  std::size_t signature_ngrams = 4;
  // Per-app probability of carrying each signature feature is drawn
  // uniformly from [signal_min, signal_max] for every malicious app.
  double signal_min = 0.5;
  double signal_max = 0.95;
  // Fraction of benign apps that carry the signature at `lookalike_strength`.
  double lookalike_ratio = 0.04;
  double lookalike_strength = 0.3;
  // Benign-typical features (intents and non-sensitive API calls) carried per
  // marker at benign_marker_rate by benign apps and malware_marker_rate by
  // malware.
  std::size_t benign_markers = 8;
  double benign_marker_rate = 0.4;
  double malware_marker_rate = 0.1;

  std::uint64_t seed = 1;

  // Throws Error when the knobs cannot be satisfied.
  void validate() const;
};

// A signature feature, rendered with a category prefix (perm::, api::, ngram::).
struct SignatureChange {
  std::int32_t month = 1;
  std::string removed;
  std::string added;
};

struct YearSignature {
  std::int32_t year = 0;
  std::vector<std::string> features;      // in effect on January 1st
  std::vector<SignatureChange> changes;   // rotations during the year
};

struct SynthCorpus {
  std::vector<FeatureRecord> records;
  SensitiveApiCatalog catalog;
  std::vector<YearSignature> schedule;
};

SynthCorpus generate(const SynthSpec& spec);

// Signature schedule per year, identical to what generate() plants.
std::vector<YearSignature> describe_signal(const SynthSpec& spec);
std::string format_signal(const std::vector<YearSignature>& schedule);

// Signature features active at a given (year, month).
std::vector<std::string> signature_at(const std::vector<YearSignature>& schedule, std::int32_t year,
                                      std::int32_t month);

// The API name pool and catalog used by generate() for the given knobs.
std::vector<std::string> synth_api_names(std::size_t n_apis);
SensitiveApiCatalog synth_catalog(const SynthSpec& spec);

}  // namespace mdbench
