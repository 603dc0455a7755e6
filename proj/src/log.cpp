#include "orbit/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace orbit::log {

namespace {
std::atomic<int> g_level{static_cast<int>(Level::warn)};
std::mutex g_mu;

const char* name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: return "off";
  }
  return "info";
}
}  // namespace

void set_level(Level level) { g_level = static_cast<int>(level); }

Level level_from_string(std::string_view s) {
  if (s == "debug") return Level::debug;
  if (s == "info") return Level::info;
  if (s == "warn") return Level::warn;
  if (s == "error") return Level::error;
  return Level::off;
}

void event(Level level, std::string_view stage, std::string_view item, std::string_view msg,
           const nlohmann::json& extra) {
  if (static_cast<int>(level) < g_level.load()) return;
  nlohmann::ordered_json j;
  j["level"] = name(level);
  j["stage"] = stage;
  if (!item.empty()) j["item"] = item;
  j["msg"] = msg;
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  }
  const std::string line = j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(g_mu);
  std::cerr << line << '\n';
}

}  // namespace orbit::log
