#pragma once

// Minimal leveled logger. Everything goes to stderr so stdout stays clean
// for data sinks. Level comes from SEC_LOG=debug|info|warn (default info).

#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>
#include <string_view>

namespace sec::log {

enum class Level { debug = 0, info = 1, warn = 2 };

inline Level parse_level(std::string_view s) {
  if (s == "debug") return Level::debug;
  if (s == "warn") return Level::warn;
  return Level::info;
}

inline Level& threshold() {
  static Level level = [] {
    const char* env = std::getenv("SEC_LOG");
    return env ? parse_level(env) : Level::info;
  }();
  return level;
}

inline void write(Level level, std::string_view msg) {
  if (level < threshold()) return;
  static std::mutex mu;
  static constexpr const char* kNames[] = {"debug", "info", "warn"};
  std::lock_guard lock(mu);
  std::fprintf(stderr, "[%s] %.*s\n", kNames[static_cast<int>(level)],
               static_cast<int>(msg.size()), msg.data());
}

inline void debug(std::string_view msg) { write(Level::debug, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }

}  // namespace sec::log
