#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stitch/bench/parallel.hpp"

namespace stitch::bench {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  bool operator==(const MeanStd&) const = default;
};

/// Per-seed means. Length and steps cover successful episodes only and are
/// empty when the seed had none.
struct SeedResult {
  std::uint64_t seed = 0;
  int episodes = 0;
  int successes = 0;
  std::optional<double> length_mm;
  std::optional<double> steps;

  double success_rate() const { return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0; }
  bool operator==(const SeedResult&) const = default;
};

/// One evaluated configuration. Aggregates are mean and population std of
/// the per-seed means; length and steps are absent when no seed succeeded.
struct ReportRow {
  std::string label;
  /// Free-form parameters of the configuration (e.g. lambda, demos).
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<SeedResult> seeds;

  MeanStd success() const;
  std::optional<MeanStd> length_mm() const;
  std::optional<MeanStd> steps() const;
  bool operator==(const ReportRow&) const = default;
};

struct RunReport {
  static constexpr int kVersion = 1;

  std::string command;
  std::uint64_t fingerprint = 0;
  std::vector<ReportRow> rows;
  // Timing, excluded from the determinism payload.
  double wall_time_s = 0.0;
  std::int64_t env_steps = 0;
  double steps_per_s = 0.0;

  bool operator==(const RunReport&) const = default;
};

MeanStd mean_std(const std::vector<double>& xs);

/// Groups outcomes by seed, in first-appearance order.
std::vector<SeedResult> seed_results(const std::vector<EpisodeOutcome>& outcomes);

enum class ReportFormat { Csv, Json, Markdown };
ReportFormat report_format_from_string(std::string_view s);
std::string_view extension(ReportFormat f);

/// Report without timing fields; two runs of the same config compare equal.
nlohmann::json payload_json(const RunReport& r);
nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

/// "0.96 ± 0.05", or "/" when absent.
std::string format_cell(const std::optional<MeanStd>& m);

void emit_report(std::ostream& out, const RunReport& r, ReportFormat f);
/// Inverse of the csv emitter.
RunReport read_report_csv(std::istream& in);

}  // namespace stitch::bench
