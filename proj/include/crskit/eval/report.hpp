#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "crskit/eval/metrics.hpp"
#include "crskit/util/strings.hpp"

namespace crskit::eval {

struct MetricReport {
  std::string task;
  std::string split;
  long count = 0;
  MetricMap metrics;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Header plus one "name  value" line per metric, names in alphabetical order.
inline std::string format_report(const MetricReport& r) {
  std::string out = r.task + " " + r.split + " (" + std::to_string(r.count) + " instances)\n";
  for (const auto& [name, v] : r.metrics) out += name + "  " + fixed6(v) + "\n";
  return out;
}

inline nlohmann::json report_to_json(const MetricReport& r, const std::string& timestamp) {
  return {{"split", r.split}, {"task", r.task}, {"metrics", r.metrics}, {"count", r.count}, {"timestamp", timestamp}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.task = j.at("task").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.count = j.at("count").get<long>();
  r.metrics = j.at("metrics").get<MetricMap>();
  return r;
}

inline void append_report(const std::filesystem::path& jsonl, const MetricReport& r) {
  std::ofstream out(jsonl, std::ios::app | std::ios::binary);
  if (!out) throw EvaluationError("cannot append to " + jsonl.string());
  out << report_to_json(r, util::iso_time_now()).dump() << "\n";
}

inline std::vector<MetricReport> read_reports(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl, std::ios::binary);
  if (!in) throw EvaluationError("cannot read " + jsonl.string());
  std::vector<MetricReport> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(report_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace crskit::eval
