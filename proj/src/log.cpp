#include "omcrl/log.hpp"

#include <atomic>
#include <iostream>

namespace omcrl {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
std::atomic<long> g_warnings{0};
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_info(const std::string& message) {
  if (g_level <= LogLevel::info) std::cerr << "[info] " << message << '\n';
}

void log_warn(const std::string& message) {
  ++g_warnings;
  if (g_level <= LogLevel::warn) std::cerr << "[warn] " << message << '\n';
}

long warning_count() { return g_warnings; }

}  // namespace omcrl
