#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbit/agent.hpp"
#include "orbit/datastats.hpp"
#include "orbit/genesis.hpp"
#include "orbit/harvest.hpp"
#include "orbit/metasearch.hpp"
#include "orbit/verify_external.hpp"
#include "orbit/verify_self.hpp"
#include "orbit/webtext.hpp"

namespace orbit {

/// Everything a pipeline run needs, parsed from one JSON document. Every
/// section is optional and falls back to the library defaults.
struct PipelineConfig {
  nlohmann::json raw = nlohmann::json::object();
  std::filesystem::path base_dir;  // relative paths resolve against this

  nlohmann::json profiles = nlohmann::json::array();  // Gateway::from_config entries
  std::vector<std::filesystem::path> fixture_routes;  // offline HTTP, replaces the network
  std::optional<std::filesystem::path> templates_dir;

  WikiClientOptions wiki;
  HarvestLimits harvest;
  std::chrono::milliseconds harvest_interval{1000};
  GenerationPolicy genesis;
  SelfVerifyPolicy self_verify;
  FetchPolicy fetch;
  CascadeConfig cascade;
  LabelConfig labels;
  AgentConfig agent;

  nlohmann::json search = nlohmann::json::object();  // backends_from_config input
  MetaSearchOptions search_options;
  std::optional<std::filesystem::path> search_cache;
};

/// Throws Error(ConfigError, "<section>.<field>") on unknown sections, wrong
/// types or invalid values.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// sha256 of the canonical form: keys sorted, integral floats written as
/// integers, no whitespace. Formatting and key order do not change it.
std::string config_hash(const nlohmann::json& j);
nlohmann::json canonical_json(const nlohmann::json& j);

}  // namespace orbit
