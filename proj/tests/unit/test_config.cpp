#include <doctest.h>

#include <optional>
#include <set>

#include "orbit/config.hpp"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "test_support.hpp"

using namespace orbit;
using nlohmann::json;

namespace {

std::optional<ErrorCode> config_error_code(const json& j) {
  try {
    parse_pipeline_config(j, ".");
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("empty config falls back to defaults") {
  const auto c = parse_pipeline_config(json::object(), "/base");
  CHECK(c.profiles.empty());
  CHECK(c.fixture_routes.empty());
  CHECK(c.genesis.max_attempts == 3);
  CHECK(c.search_options.cache_mode == CacheMode::Off);
  CHECK(c.agent.duplicate_query_policy == DuplicateQueryPolicy::Block);
}

TEST_CASE("pipeline fixture config parses and resolves paths") {
  const auto path = testing::fixture_path("pipeline/config.json");
  const auto c = load_pipeline_config(path);
  CHECK(c.base_dir == path.parent_path());
  REQUIRE(c.fixture_routes.size() == 2);
  CHECK(c.fixture_routes[1] == path.parent_path() / "web_routes.json");
  CHECK(c.harvest.global_budget == 20);
  CHECK(c.harvest_interval.count() == 0);
  CHECK(c.genesis.profile == "generator");
  CHECK(c.genesis.min_evidence == 5);
  CHECK(c.genesis.rng_seed == 11);
  REQUIRE(c.cascade.round_profiles.size() == 2);
  CHECK(c.cascade.round_profiles[0] == "judge_small");
  CHECK(c.self_verify.accept == std::set<SelfVerdict>{SelfVerdict::FullyVerified});
}

TEST_CASE("unknown sections, unknown keys and bad values are config errors") {
  CHECK(config_error_code({{"bogus", json::object()}}) == ErrorCode::ConfigError);
  CHECK(config_error_code({{"genesis", {{"max_attemps", 3}}}}) == ErrorCode::ConfigError);
  CHECK(config_error_code({{"genesis", {{"max_attempts", "three"}}}}) == ErrorCode::ConfigError);
  CHECK(config_error_code({{"self_verify", {{"accept", {"MOSTLY"}}}}}) == ErrorCode::ConfigError);
  CHECK(config_error_code({{"agent", {{"duplicate_query_policy", "ignore"}}}}) == ErrorCode::ConfigError);
  CHECK(config_error_code({{"search", {{"cache_mode", "sometimes"}}}}) == ErrorCode::ConfigError);
  CHECK(config_error_code(json::array()) == ErrorCode::ConfigError);
}

TEST_CASE("error detail names the offending field") {
  try {
    parse_pipeline_config({{"genesis", {{"max_attemps", 3}}}}, ".");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.detail().find("genesis.max_attemps") != std::string::npos);
  }
}

TEST_CASE("search cache path defaults the mode to record") {
  const auto c = parse_pipeline_config({{"search", {{"cache", "s.jsonl"}}}}, "/b");
  CHECK(c.search_options.cache_mode == CacheMode::Record);
  REQUIRE(c.search_cache);
  CHECK(*c.search_cache == std::filesystem::path("/b/s.jsonl"));
  const auto r = parse_pipeline_config({{"search", {{"cache", "s.jsonl"}, {"cache_mode", "replay"}}}}, "/b");
  CHECK(r.search_options.cache_mode == CacheMode::Replay);
}

TEST_CASE("config hash ignores key order and integral float spelling") {
  const auto a = json::parse(R"({"genesis":{"rng_seed":11,"max_attempts":3},"harvest":{"global_budget":20}})");
  const auto b = json::parse(R"({"harvest":{"global_budget":20.0},"genesis":{"max_attempts":3,"rng_seed":11}})");
  const auto c = json::parse(R"({"harvest":{"global_budget":21},"genesis":{"max_attempts":3,"rng_seed":11}})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 64);
}

TEST_CASE("unreadable or malformed config files are config errors") {
  testing::TempDir dir;
  io::write_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_pipeline_config(dir / "bad.json"), Error);
  try {
    load_pipeline_config(dir / "missing.json");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}
