#include "emg2artic/log.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string_view>

namespace emg2artic::log {

namespace {

Level from_env() {
  const char* v = std::getenv("EMG2ARTIC_LOG");
  if (!v) return Level::Info;
  const std::string_view s(v);
  if (s == "error") return Level::Error;
  if (s == "debug") return Level::Debug;
  return Level::Info;
}

std::atomic<int>& current() {
  static std::atomic<int> l{static_cast<int>(from_env())};
  return l;
}

std::mutex& sink() {
  static std::mutex m;
  return m;
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level l) { current().store(static_cast<int>(l)); }

void write(Level l, const char* text) {
  static constexpr const char* tags[] = {"error", "info", "debug"};
  std::lock_guard lock(sink());
  std::fprintf(stderr, "[%s] %s\n", tags[static_cast<int>(l)], text);
}

}  // namespace emg2artic::log
