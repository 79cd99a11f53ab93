#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdbench/record.hpp"

namespace mdbench {

inline constexpr std::int32_t kDefaultOpcodeVocab = 256;
inline constexpr int kRecordSchemaVersion = 1;

struct Violation {
  std::string code;  // machine-readable, e.g. "dangling_edge"
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
};

struct ValidationOptions {
  std::int32_t opcode_vocab_size = kDefaultOpcodeVocab;
  std::optional<std::pair<std::int32_t, std::int32_t>> year_range;
};

ValidationResult validate_record(const FeatureRecord& record, const SensitiveApiCatalog& catalog,
                                 const ValidationOptions& options = {});

// Per-record validation plus corpus-level app_id uniqueness.
ValidationResult validate_corpus(std::span<const FeatureRecord> records,
                                 const SensitiveApiCatalog& catalog,
                                 const ValidationOptions& options = {});

bool is_valid_utf8(std::string_view text);

// JSON-lines persistence. Keys are emitted in the fixed order
//   v, app_id, label, vt_positives, year, month, size_mb, manifest, code, graph
// with set-valued fields sorted. Throws Error on unwritable path or a record
// holding non-UTF-8 text.
void write_records(std::span<const FeatureRecord> records, const std::string& path);
std::string record_to_json_line(const FeatureRecord& record);

// Throws Error on a missing file and ParseError (with line number) on the
// first malformed line.
std::vector<FeatureRecord> read_records(const std::string& path);
FeatureRecord record_from_json_line(std::string_view line, std::size_t line_number = 0);

struct RecordFilter {
  std::optional<std::pair<std::int32_t, std::int32_t>> years;  // inclusive
  std::optional<Label> label;
  std::optional<std::pair<std::int32_t, std::int32_t>> months;  // inclusive, 1-12
};

// Stable-order subsequence matching every provided predicate. Inverted
// ranges throw Error.
std::vector<FeatureRecord> query(std::span<const FeatureRecord> records, const RecordFilter& filter);

}  // namespace mdbench
