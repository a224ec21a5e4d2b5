#pragma once

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/pattern_formatter.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <mutex>

namespace crskit::util {

// Process-wide logger. Lines look like "2026-10-14T04:15:00Z info message".
inline std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
    auto lg = std::make_shared<spdlog::logger>("crskit", sink);
    lg->set_pattern("%Y-%m-%dT%H:%M:%SZ %l %v", spdlog::pattern_time_type::utc);
    lg->set_level(spdlog::level::info);
    lg->flush_on(spdlog::level::warn);
    return lg;
  }();
  return instance;
}

inline void add_log_file(const std::filesystem::path& path) {
  auto sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), false);
  sink->set_formatter(
      std::make_unique<spdlog::pattern_formatter>("%Y-%m-%dT%H:%M:%SZ %l %v", spdlog::pattern_time_type::utc));
  logger()->sinks().push_back(sink);
}

// Mirrors log lines into a file for its lifetime.
class ScopedLogFile {
 public:
  explicit ScopedLogFile(const std::filesystem::path& path)
      : sink_(std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), false)) {
    sink_->set_formatter(
        std::make_unique<spdlog::pattern_formatter>("%Y-%m-%dT%H:%M:%SZ %l %v", spdlog::pattern_time_type::utc));
    logger()->sinks().push_back(sink_);
  }
  ~ScopedLogFile() {
    sink_->flush();
    auto& sinks = logger()->sinks();
    sinks.erase(std::remove(sinks.begin(), sinks.end(), sink_), sinks.end());
  }
  ScopedLogFile(const ScopedLogFile&) = delete;
  ScopedLogFile& operator=(const ScopedLogFile&) = delete;

 private:
  spdlog::sink_ptr sink_;
};

inline void set_verbose(bool on) { logger()->set_level(on ? spdlog::level::debug : spdlog::level::info); }

inline void set_quiet(bool on) { logger()->set_level(on ? spdlog::level::err : spdlog::level::info); }

}  // namespace crskit::util
