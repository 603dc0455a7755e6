#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace orbit::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_level(Level level);
Level level_from_string(std::string_view s);

/// One JSON object per line on stderr:
/// {"level":..,"stage":..,"item":..,"msg":..,...extra}
void event(Level level, std::string_view stage, std::string_view item, std::string_view msg,
           const nlohmann::json& extra = nlohmann::json::object());

inline void info(std::string_view stage, std::string_view item, std::string_view msg,
                 const nlohmann::json& extra = nlohmann::json::object()) {
  event(Level::info, stage, item, msg, extra);
}
inline void warn(std::string_view stage, std::string_view item, std::string_view msg,
                 const nlohmann::json& extra = nlohmann::json::object()) {
  event(Level::warn, stage, item, msg, extra);
}

}  // namespace orbit::log
