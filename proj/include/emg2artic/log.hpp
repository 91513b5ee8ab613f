#pragma once

// Leveled stderr logging. EMG2ARTIC_LOG=error|info|debug (default info).

#include <cstdio>
#include <utility>

namespace emg2artic::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

Level level();
void set_level(Level l);
void write(Level l, const char* text);

template <typename... Args>
void emit(Level l, const char* fmt, Args&&... args) {
  if (static_cast<int>(l) > static_cast<int>(level())) return;
  char buf[1024];
  if constexpr (sizeof...(Args) == 0) {
    std::snprintf(buf, sizeof buf, "%s", fmt);
  } else {
    std::snprintf(buf, sizeof buf, fmt, std::forward<Args>(args)...);
  }
  write(l, buf);
}

template <typename... Args>
void error(const char* fmt, Args&&... args) { emit(Level::Error, fmt, std::forward<Args>(args)...); }
template <typename... Args>
void info(const char* fmt, Args&&... args) { emit(Level::Info, fmt, std::forward<Args>(args)...); }
template <typename... Args>
void debug(const char* fmt, Args&&... args) { emit(Level::Debug, fmt, std::forward<Args>(args)...); }

}  // namespace emg2artic::log
