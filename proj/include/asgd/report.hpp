#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace asgd {

// Upper endpoint of the 95% Wilson score interval for k successes in n
// trials (z = 1.959963984540054).
double wilson_upper95(std::uint64_t successes, std::uint64_t trials);

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> hit_time;
  double final_dist_sq = 0.0;
  int tau_max = 0;
  double tau_avg = 0.0;
  std::string verdict;
};

// Serializable experiment outcome. Orders are fixed (maps are sorted, trials
// by trial id) so emitting the same report twice is byte-identical.
struct ExperimentReport {
  int schema_version = 1;
  std::string experiment_id;
  std::map<std::string, std::string> config;
  std::vector<TrialRecord> trials;
  std::map<std::string, double> aggregates;
  std::map<std::string, std::string> verdicts;  // "PASS ...", "FAIL ...", "VACUOUS ..."
  std::vector<std::uint64_t> seeds;
  double wall_seconds = 0.0;  // informational; excluded from regeneration checks

  bool all_pass() const;
};

enum class ReportFormat { Csv, Json, Markdown };

ReportFormat parse_report_format(const std::string& text);

// Writes <dir>/<experiment_id>.<ext>; returns the path.
// CSV columns: trial,seed,hit_time,final_dist_sq,tau_max,tau_avg,verdict
std::string emit_report(const ExperimentReport& report, const std::string& dir,
                        ReportFormat format);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
std::string report_to_csv(const ExperimentReport& report);
std::string report_to_markdown(const ExperimentReport& report);

}  // namespace asgd
