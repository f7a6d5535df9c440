#include "asgd/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace asgd {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double wilson_upper95(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("trials must be positive");
  if (successes > trials) throw std::invalid_argument("successes > trials");
  constexpr double z = 1.959963984540054;
  const double n = double(trials);
  const double p = double(successes) / n;
  const double z2 = z * z;
  const double center = p + z2 / (2.0 * n);
  const double radius =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return (center + radius) / (1.0 + z2 / n);
}

bool ExperimentReport::all_pass() const {
  for (const auto& [key, verdict] : verdicts)
    if (verdict.rfind("FAIL", 0) == 0) return false;
  for (const auto& trial : trials)
    if (trial.verdict.rfind("FAIL", 0) == 0) return false;
  return true;
}

ReportFormat parse_report_format(const std::string& text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  if (text == "markdown" || text == "md") return ReportFormat::Markdown;
  throw std::invalid_argument("unknown report format: " + text);
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "trial,seed,hit_time,final_dist_sq,tau_max,tau_avg,verdict\n";
  for (const auto& t : report.trials) {
    out += std::to_string(t.trial);
    out += ',';
    out += std::to_string(t.seed);
    out += ',';
    out += t.hit_time ? std::to_string(*t.hit_time) : std::string("-1");
    out += ',';
    out += fmt_double(t.final_dist_sq);
    out += ',';
    out += std::to_string(t.tau_max);
    out += ',';
    out += fmt_double(t.tau_avg);
    out += ',';
    out += t.verdict;
    out += '\n';
  }
  return out;
}

std::string report_to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = report.schema_version;
  j["experiment_id"] = report.experiment_id;
  j["config"] = report.config;
  j["seeds"] = report.seeds;
  nlohmann::ordered_json trials = nlohmann::ordered_json::array();
  for (const auto& t : report.trials) {
    nlohmann::ordered_json row;
    row["trial"] = t.trial;
    row["seed"] = t.seed;
    if (t.hit_time)
      row["hit_time"] = *t.hit_time;
    else
      row["hit_time"] = nullptr;
    row["final_dist_sq"] = t.final_dist_sq;
    row["tau_max"] = t.tau_max;
    row["tau_avg"] = t.tau_avg;
    row["verdict"] = t.verdict;
    trials.push_back(std::move(row));
  }
  j["trials"] = std::move(trials);
  j["aggregates"] = report.aggregates;
  j["verdicts"] = report.verdicts;
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentReport report;
  report.schema_version = j.at("schema_version").get<int>();
  report.experiment_id = j.at("experiment_id").get<std::string>();
  report.config = j.at("config").get<std::map<std::string, std::string>>();
  report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& row : j.at("trials")) {
    TrialRecord t;
    t.trial = row.at("trial").get<std::uint64_t>();
    t.seed = row.at("seed").get<std::uint64_t>();
    if (!row.at("hit_time").is_null())
      t.hit_time = row.at("hit_time").get<std::uint64_t>();
    t.final_dist_sq = row.at("final_dist_sq").get<double>();
    t.tau_max = row.at("tau_max").get<int>();
    t.tau_avg = row.at("tau_avg").get<double>();
    t.verdict = row.at("verdict").get<std::string>();
    report.trials.push_back(std::move(t));
  }
  report.aggregates = j.at("aggregates").get<std::map<std::string, double>>();
  report.verdicts = j.at("verdicts").get<std::map<std::string, std::string>>();
  report.wall_seconds = j.at("wall_seconds").get<double>();
  return report;
}

std::string report_to_markdown(const ExperimentReport& report) {
  std::string out = "# " + report.experiment_id + "\n\n";
  out += "## Config\n\n";
  for (const auto& [k, v] : report.config) out += "- `" + k + "` = " + v + "\n";
  out += "\n## Aggregates\n\n| key | value |\n|---|---|\n";
  for (const auto& [k, v] : report.aggregates)
    out += "| " + k + " | " + fmt_double(v) + " |\n";
  out += "\n## Verdicts\n\n";
  for (const auto& [k, v] : report.verdicts) out += "- **" + k + "**: " + v + "\n";
  out += "\n## Trials\n\n";
  out += std::to_string(report.trials.size()) + " trials; seeds embedded in the CSV/JSON forms.\n";
  return out;
}

std::string emit_report(const ExperimentReport& report, const std::string& dir,
                        ReportFormat format) {
  std::filesystem::create_directories(dir);
  const char* ext = format == ReportFormat::Csv      ? ".csv"
                    : format == ReportFormat::Json   ? ".json"
                                                     : ".md";
  const std::string path =
      (std::filesystem::path(dir) / (report.experiment_id + ext)).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("unwritable path: " + path);
  switch (format) {
    case ReportFormat::Csv: out << report_to_csv(report); break;
    case ReportFormat::Json: out << report_to_json(report); break;
    case ReportFormat::Markdown: out << report_to_markdown(report); break;
  }
  return path;
}

}  // namespace asgd
