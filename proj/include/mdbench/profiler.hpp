#pragma once

#include <chrono>
#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "mdbench/error.hpp"

namespace mdbench {

enum class Phase { transform, train, test };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

struct TimingRecord {
  std::string approach;
  Phase phase = Phase::transform;
  std::int32_t year = 0;
  double wall_seconds = 0.0;
  std::int64_t n_items = 0;
};

struct TimingLabel {
  std::string approach;
  Phase phase = Phase::transform;
  std::int32_t year = 0;
  std::int64_t n_items = 0;
};

// Raised when a timed thunk throws; carries the partial record and the
// original message.
class TimedError : public Error {
 public:
  TimedError(TimingRecord record, const std::string& what) : Error(what), record_(std::move(record)) {}
  const TimingRecord& record() const { return record_; }

 private:
  TimingRecord record_;
};

template <typename F>
auto time_phase(const TimingLabel& label, F&& thunk) {
  using Clock = std::chrono::steady_clock;
  TimingRecord rec{label.approach, label.phase, label.year, 0.0, label.n_items};
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  try {
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      thunk();
      rec.wall_seconds = elapsed();
      return rec;
    } else {
      auto result = thunk();
      rec.wall_seconds = elapsed();
      return std::pair<decltype(result), TimingRecord>(std::move(result), std::move(rec));
    }
  } catch (const TimedError&) {
    throw;
  } catch (const std::exception& e) {
    rec.wall_seconds = elapsed();
    throw TimedError(std::move(rec), e.what());
  }
}

// Mean cost of one empty steady_clock measurement, in seconds.
double timer_overhead(int samples = 1000);

struct EfficiencyRow {
  std::string approach;
  std::int32_t year = 0;
  Phase phase = Phase::transform;
  double total_seconds = 0.0;
  std::int64_t n_items = 0;
  std::size_t n_records = 0;
  double seconds_per_item = 0.0;  // 0 when n_items == 0
};

// Grouped by (approach, year, phase), sorted in that order.
std::vector<EfficiencyRow> efficiency_report(const std::vector<TimingRecord>& records);

// CSV: approach,year,phase,total_seconds,n_items,n_records,seconds_per_item
void write_timings_csv(const std::vector<EfficiencyRow>& rows, double overhead, const std::string& path);

}  // namespace mdbench
