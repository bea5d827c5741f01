#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace citeie::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

inline std::atomic<Level>& level() {
  static std::atomic<Level> lvl{Level::warn};
  return lvl;
}

inline void write(Level at, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(level().load()) < static_cast<int>(at)) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[" << tag << "] " << msg << '\n';
}

inline void warn(std::string_view msg) { write(Level::warn, "warn", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }

}  // namespace citeie::log
