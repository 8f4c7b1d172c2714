#pragma once

#include <string>

namespace omcrl {

enum class LogLevel { debug, info, warn, error, quiet };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(const std::string& message);
void log_warn(const std::string& message);

// Number of warnings emitted so far; used by tests to observe fallbacks.
long warning_count();

}  // namespace omcrl
