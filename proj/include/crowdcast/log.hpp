#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace crowdcast {

enum class LogLevel { off = 0, info = 1, debug = 2 };

// Verbosity comes from CROWDCAST_LOG (off|info|debug); unset means off.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CROWDCAST_LOG");
    if (env == nullptr) return LogLevel::off;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::off;
  }();
  return level;
}

template <typename... Args>
void log_info(const Args&... args) {
  if (log_level() >= LogLevel::info) {
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[crowdcast] " << os.str() << "\n";
  }
}

template <typename... Args>
void log_debug(const Args&... args) {
  if (log_level() >= LogLevel::debug) {
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[crowdcast:debug] " << os.str() << "\n";
  }
}

}  // namespace crowdcast
