#include "mdbench/profiler.hpp"

#include <fstream>
#include <map>
#include <tuple>

namespace mdbench {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::transform: return "transform";
    case Phase::train: return "train";
    case Phase::test: return "test";
  }
  return "transform";
}

Phase parse_phase(std::string_view text) {
  for (auto p : {Phase::transform, Phase::train, Phase::test}) {
    if (text == to_string(p)) return p;
  }
  throw Error("unknown phase '" + std::string(text) + "'");
}

double timer_overhead(int samples) {
  using Clock = std::chrono::steady_clock;
  if (samples < 1) samples = 1;
  double total = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto a = Clock::now();
    const auto b = Clock::now();
    total += std::chrono::duration<double>(b - a).count();
  }
  return total / samples;
}

std::vector<EfficiencyRow> efficiency_report(const std::vector<TimingRecord>& records) {
  std::map<std::tuple<std::string, std::int32_t, int>, EfficiencyRow> groups;
  for (const auto& r : records) {
    auto& row = groups[{r.approach, r.year, static_cast<int>(r.phase)}];
    row.approach = r.approach;
    row.year = r.year;
    row.phase = r.phase;
    row.total_seconds += r.wall_seconds;
    row.n_items += r.n_items;
    ++row.n_records;
  }
  std::vector<EfficiencyRow> out;
  out.reserve(groups.size());
  for (auto& [key, row] : groups) {
    row.seconds_per_item = row.n_items > 0 ? row.total_seconds / static_cast<double>(row.n_items) : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

void write_timings_csv(const std::vector<EfficiencyRow>& rows, double overhead, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# timer_overhead_seconds=" << overhead << "\n";
  out << "approach,year,phase,total_seconds,n_items,n_records,seconds_per_item\n";
  for (const auto& r : rows) {
    out << r.approach << ',' << r.year << ',' << to_string(r.phase) << ',' << r.total_seconds << ',' << r.n_items
        << ',' << r.n_records << ',' << r.seconds_per_item << "\n";
  }
}

}  // namespace mdbench
