#include "orbit/stage_io.hpp"

#include "orbit/model.hpp"

namespace orbit {

std::string render_dead_letter(std::string_view stage, const nlohmann::ordered_json& item, std::string_view error) {
  nlohmann::ordered_json j;
  j["version"] = kRecordVersion;
  j["stage"] = stage;
  j["error"] = error;
  j["item"] = item;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace orbit
