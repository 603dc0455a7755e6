#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbit/clock.hpp"
#include "orbit/http.hpp"

namespace orbit {

struct ProviderCapabilities {
  bool web_search = false;
  bool long_reasoning = false;
};

struct ProviderProfile {
  std::string name;
  std::string kind = "scripted";  // "scripted" | "openai-compat"
  std::string base_url;
  std::string model;        // model id; compared for judge/generator separation
  std::string api_key_env;  // name of the env var holding the key, never the key
  ProviderCapabilities capabilities;
  int max_context_tokens = 32768;
  std::chrono::milliseconds pacing{0};  // min spacing between request starts
  long timeout_ms = 120000;
  std::filesystem::path scenario;  // scripted only
};

struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 8192;
};

struct ChatResponse {
  std::string text;
  std::string provider;
  std::int64_t latency_ms = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

/// Replays canned responses. Each request consumes the first unconsumed
/// entry whose matcher accepts the request's user text.
class ScriptedProvider final : public Provider {
 public:
  struct Entry {
    enum class Match { Any, Contains, Sha256 } match = Match::Any;
    std::string pattern;
    std::string response;
    std::string error;  // "", "timeout", "refusal"
  };

  explicit ScriptedProvider(std::string name, std::vector<Entry> entries = {});
  /// {"entries":[{"match":{"contains":"..."}|{"sha256":"..."}|{"any":true},
  ///              "response":"...", "error":"timeout"?}]}
  static std::vector<Entry> load_scenario(const nlohmann::json& j);
  static std::vector<Entry> load_scenario_file(const std::filesystem::path& path);

  void add(Entry e);
  ChatResponse complete(const ChatRequest& req) override;
  std::size_t remaining() const;

 private:
  std::string name_;
  mutable std::mutex mu_;
  std::vector<Entry> entries_;
  std::vector<bool> used_;
};

/// OpenAI-style chat completions over HTTP.
class OpenAiCompatProvider final : public Provider {
 public:
  OpenAiCompatProvider(ProviderProfile profile, std::shared_ptr<HttpTransport> transport);
  ChatResponse complete(const ChatRequest& req) override;

 private:
  ProviderProfile profile_;
  std::shared_ptr<HttpTransport> transport_;
};

/// Routes requests to named profiles. One profile is a serial lane: at most
/// one request in flight, starts spaced by the profile's pacing.
class Gateway {
 public:
  struct Call {
    std::string profile;
    Clock::time_point start;
    Clock::time_point end;
  };

  explicit Gateway(Clock& clock) : clock_(clock) {}

  void add(ProviderProfile profile, std::shared_ptr<Provider> provider);
  bool has(const std::string& profile) const;
  const ProviderProfile& profile(const std::string& name) const;
  std::vector<std::string> profile_names() const;

  /// Throws Error(InvalidArgument) for temperature outside [0, 2] and
  /// Error(ConfigError) for unknown profiles; provider errors propagate.
  ChatResponse complete(const std::string& profile, const ChatRequest& req);

  std::vector<Call> calls() const;
  std::size_t call_count(const std::string& profile) const;

  /// Builds profiles from {"profiles":[{name, kind, base_url, model,
  /// api_key_env, pacing_ms, max_context_tokens, capabilities, scenario}]}.
  /// Relative scenario paths resolve against `base_dir`.
  static std::unique_ptr<Gateway> from_config(const nlohmann::json& cfg, const std::filesystem::path& base_dir,
                                              Clock& clock, std::shared_ptr<HttpTransport> transport = nullptr);

 private:
  struct Lane {
    ProviderProfile profile;
    std::shared_ptr<Provider> provider;
    std::mutex mu;
    std::optional<Clock::time_point> last_start;
  };

  Lane& lane(const std::string& name) const;

  Clock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Lane>> lanes_;
  std::vector<Call> calls_;
};

ProviderProfile profile_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace orbit
