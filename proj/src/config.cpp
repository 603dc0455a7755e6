#include "orbit/config.hpp"

#include <cmath>
#include <set>

#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/io.hpp"

namespace orbit {

namespace {

// Typed reads from one config section; every failure names "<section>.<key>".
class Section {
 public:
  Section(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    j_ = root[name_];
    if (!j_.is_object()) fail(ErrorCode::ConfigError, name_);
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items())
      if (!known.count(k)) fail(ErrorCode::ConfigError, name_ + "." + k + ": unknown key");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_[key].is_null(); }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      bad(key);
    }
  }

  void read_ms(const char* key, std::chrono::milliseconds& out) const {
    long long ms = out.count();
    read(key, ms);
    if (ms < 0) bad(key);
    out = std::chrono::milliseconds(ms);
  }

  void read_positive(const char* key, int& out) const {
    read(key, out);
    if (out <= 0) bad(key);
  }

  [[noreturn]] void bad(const char* key) const { fail(ErrorCode::ConfigError, name_ + "." + key); }
  const nlohmann::json& json() const { return j_; }

 private:
  std::string name_;
  nlohmann::json j_ = nlohmann::json::object();
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

SelfVerdict verdict_from_config(const std::string& s) {
  if (s == "FULL") return SelfVerdict::FullyVerified;
  if (s == "PARTIAL") return SelfVerdict::PartiallyVerified;
  if (s == "INCORRECT") return SelfVerdict::Incorrect;
  fail(ErrorCode::ConfigError, "self_verify.accept: " + s);
}

}  // namespace

PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
  static const std::set<std::string> sections = {"profiles", "http",    "templates_dir", "harvest", "genesis",
                                                 "self_verify", "fetch", "cascade",      "labels",  "agent",
                                                 "search"};
  for (const auto& [k, _] : j.items())
    if (!sections.count(k)) fail(ErrorCode::ConfigError, k + ": unknown section");

  PipelineConfig c;
  c.raw = j;
  c.base_dir = base_dir;
  if (j.contains("profiles")) {
    if (!j["profiles"].is_array()) fail(ErrorCode::ConfigError, "profiles");
    c.profiles = j["profiles"];
  }
  if (j.contains("templates_dir")) {
    if (!j["templates_dir"].is_string()) fail(ErrorCode::ConfigError, "templates_dir");
    c.templates_dir = resolve(base_dir, j["templates_dir"]);
  }

  const Section http(j, "http");
  http.allow({"fixture_routes"});
  if (http.has("fixture_routes")) {
    std::vector<std::string> routes;
    http.read("fixture_routes", routes);
    for (const auto& r : routes) c.fixture_routes.push_back(resolve(base_dir, r));
  }

  const Section harvest(j, "harvest");
  harvest.allow({"endpoint", "user_agent", "global_budget", "recursion_depth", "interval_ms", "max_retries", "workers"});
  harvest.read("endpoint", c.wiki.endpoint);
  harvest.read("user_agent", c.wiki.user_agent);
  harvest.read("max_retries", c.wiki.max_retries);
  if (harvest.has("global_budget")) {
    std::size_t budget = 0;
    harvest.read("global_budget", budget);
    c.harvest.global_budget = budget;
  }
  harvest.read("recursion_depth", c.harvest.recursion_depth);
  if (c.harvest.recursion_depth < 0 || c.harvest.recursion_depth > 2) harvest.bad("recursion_depth");
  harvest.read_ms("interval_ms", c.harvest_interval);

  const Section gen(j, "genesis");
  gen.allow({"profile", "min_evidence", "max_attempts", "temperature", "top_p", "max_tokens", "rng_seed"});
  gen.read("profile", c.genesis.profile);
  gen.read("min_evidence", c.genesis.min_evidence);
  gen.read_positive("max_attempts", c.genesis.max_attempts);
  gen.read("temperature", c.genesis.temperature);
  gen.read("top_p", c.genesis.top_p);
  gen.read_positive("max_tokens", c.genesis.max_tokens);
  gen.read("rng_seed", c.genesis.rng_seed);

  const Section sv(j, "self_verify");
  sv.allow({"verifier_profile", "classifier_profile", "accept", "adopt_revised_answer", "verifier_temperature",
            "classifier_temperature", "max_tokens"});
  sv.read("verifier_profile", c.self_verify.verifier_profile);
  sv.read("classifier_profile", c.self_verify.classifier_profile);
  if (sv.has("accept")) {
    std::vector<std::string> accept;
    sv.read("accept", accept);
    if (accept.empty()) sv.bad("accept");
    c.self_verify.accept.clear();
    for (const auto& a : accept) c.self_verify.accept.insert(verdict_from_config(a));
  }
  sv.read("adopt_revised_answer", c.self_verify.adopt_revised_answer);
  sv.read("verifier_temperature", c.self_verify.verifier_temperature);
  sv.read("classifier_temperature", c.self_verify.classifier_temperature);
  sv.read_positive("max_tokens", c.self_verify.max_tokens);

  const Section fetch(j, "fetch");
  fetch.allow({"timeout_ms", "max_retries", "per_host_interval_ms", "max_bytes", "respect_robots", "max_redirects",
               "user_agent"});
  fetch.read("timeout_ms", c.fetch.timeout_ms);
  fetch.read("max_retries", c.fetch.max_retries);
  fetch.read_ms("per_host_interval_ms", c.fetch.per_host_interval);
  fetch.read("max_bytes", c.fetch.max_bytes);
  fetch.read("respect_robots", c.fetch.respect_robots);
  fetch.read("max_redirects", c.fetch.max_redirects);
  fetch.read("user_agent", c.fetch.user_agent);

  const Section cascade(j, "cascade");
  cascade.allow({"round_profiles", "answer_temperature", "verdict_temperature", "max_tokens", "bundle_budget"});
  cascade.read("round_profiles", c.cascade.round_profiles);
  if (c.cascade.round_profiles.empty()) cascade.bad("round_profiles");
  cascade.read("answer_temperature", c.cascade.answer_temperature);
  cascade.read("verdict_temperature", c.cascade.verdict_temperature);
  cascade.read_positive("max_tokens", c.cascade.max_tokens);
  cascade.read("bundle_budget", c.cascade.bundle_budget);
  if (c.cascade.bundle_budget == 0) cascade.bad("bundle_budget");

  const Section labels(j, "labels");
  labels.allow({"answer_type_profile", "decompose_profile", "temperature", "max_tokens"});
  labels.read("answer_type_profile", c.labels.answer_type_profile);
  labels.read("decompose_profile", c.labels.decompose_profile);
  labels.read("temperature", c.labels.temperature);
  labels.read_positive("max_tokens", c.labels.max_tokens);

  const Section agent(j, "agent");
  agent.allow({"profile", "max_turns", "top_k", "max_observation_chars", "max_response_tokens", "max_prompt_tokens",
               "duplicate_query_policy", "temperature"});
  agent.read("profile", c.agent.profile);
  agent.read_positive("max_turns", c.agent.max_turns);
  agent.read_positive("top_k", c.agent.top_k);
  agent.read("max_observation_chars", c.agent.max_observation_chars);
  agent.read_positive("max_response_tokens", c.agent.max_response_tokens);
  agent.read_positive("max_prompt_tokens", c.agent.max_prompt_tokens);
  if (agent.has("duplicate_query_policy")) {
    std::string p;
    agent.read("duplicate_query_policy", p);
    if (p == "block") c.agent.duplicate_query_policy = DuplicateQueryPolicy::Block;
    else if (p == "warn") c.agent.duplicate_query_policy = DuplicateQueryPolicy::Warn;
    else agent.bad("duplicate_query_policy");
  }
  agent.read("temperature", c.agent.temperature);
  try {
    validate_agent_config(c.agent);
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, "agent: " + e.detail());
  }

  const Section search(j, "search");
  search.allow({"backends", "backend_timeout_ms", "overall_timeout_ms", "cache", "cache_mode"});
  c.search = search.json();
  search.read_ms("backend_timeout_ms", c.search_options.backend_timeout);
  search.read_ms("overall_timeout_ms", c.search_options.overall_timeout);
  if (search.has("cache")) {
    std::string p;
    search.read("cache", p);
    c.search_cache = resolve(base_dir, p);
    c.search_options.cache_mode = CacheMode::Record;
  }
  if (search.has("cache_mode")) {
    std::string m;
    search.read("cache_mode", m);
    try {
      c.search_options.cache_mode = parse_cache_mode(m);
    } catch (const Error&) {
      search.bad("cache_mode");
    }
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + std::string(e.what()));
  }
  return parse_pipeline_config(j, path.parent_path());
}

nlohmann::json canonical_json(const nlohmann::json& j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : j.items()) out[k] = canonical_json(v);
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(canonical_json(v));
    return out;
  }
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  return j;
}

std::string config_hash(const nlohmann::json& j) { return sha256_hex(canonical_json(j).dump()); }

}  // namespace orbit
