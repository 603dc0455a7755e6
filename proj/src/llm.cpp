#include "orbit/llm.hpp"

#include <cstdlib>

#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"

namespace orbit {

using nlohmann::json;

ScriptedProvider::ScriptedProvider(std::string name, std::vector<Entry> entries)
    : name_(std::move(name)), entries_(std::move(entries)), used_(entries_.size(), false) {}

std::vector<ScriptedProvider::Entry> ScriptedProvider::load_scenario(const json& j) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    fail(ErrorCode::ConfigError, "scenario: missing entries array");
  std::vector<Entry> out;
  std::size_t i = 0;
  for (const auto& e : j["entries"]) {
    const std::string where = "scenario entry " + std::to_string(i++);
    if (!e.is_object()) fail(ErrorCode::ConfigError, where);
    Entry entry;
    const json match = e.value("match", json{{"any", true}});
    if (match.contains("contains")) {
      entry.match = Entry::Match::Contains;
      entry.pattern = match["contains"].get<std::string>();
    } else if (match.contains("sha256")) {
      entry.match = Entry::Match::Sha256;
      entry.pattern = text::to_lower(match["sha256"].get<std::string>());
    } else if (match.value("any", false)) {
      entry.match = Entry::Match::Any;
    } else {
      fail(ErrorCode::ConfigError, where + ": unknown matcher");
    }
    entry.response = e.value("response", "");
    entry.error = e.value("error", "");
    if (!entry.error.empty() && entry.error != "timeout" && entry.error != "refusal")
      fail(ErrorCode::ConfigError, where + ": unknown error kind " + entry.error);
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<ScriptedProvider::Entry> ScriptedProvider::load_scenario_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return load_scenario(j);
}

void ScriptedProvider::add(Entry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
  used_.push_back(false);
}

std::size_t ScriptedProvider::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (bool u : used_) n += !u;
  return n;
}

ChatResponse ScriptedProvider::complete(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  std::string digest;
  bool any_left = false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (used_[i]) continue;
    any_left = true;
    const Entry& e = entries_[i];
    bool ok = false;
    switch (e.match) {
      case Entry::Match::Any: ok = true; break;
      case Entry::Match::Contains: ok = req.user.find(e.pattern) != std::string::npos; break;
      case Entry::Match::Sha256:
        if (digest.empty()) digest = sha256_hex(req.user);
        ok = digest == e.pattern;
        break;
    }
    if (!ok) continue;
    used_[i] = true;
    if (e.error == "timeout") fail(ErrorCode::ProviderTimeout, name_);
    if (e.error == "refusal") fail(ErrorCode::ProviderRefusal, name_);
    return ChatResponse{e.response, name_, 0};
  }
  if (!any_left) fail(ErrorCode::ScenarioExhausted, name_);
  fail(ErrorCode::UnmatchedRequest, name_ + ": " + text::utf8_truncate(req.user, 120));
}

OpenAiCompatProvider::OpenAiCompatProvider(ProviderProfile profile, std::shared_ptr<HttpTransport> transport)
    : profile_(std::move(profile)), transport_(std::move(transport)) {
  if (!transport_) transport_ = std::make_shared<CurlTransport>();
}

ChatResponse OpenAiCompatProvider::complete(const ChatRequest& req) {
  json messages = json::array();
  if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  const json body = {{"model", profile_.model},
                     {"messages", messages},
                     {"temperature", req.temperature},
                     {"top_p", req.top_p},
                     {"max_tokens", req.max_tokens}};
  HttpRequest http;
  http.method = "POST";
  std::string base = profile_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  http.url = base + "/chat/completions";
  http.headers.emplace_back("Content-Type", "application/json");
  if (!profile_.api_key_env.empty()) {
    if (const char* key = std::getenv(profile_.api_key_env.c_str()); key && *key)
      http.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  http.body = body.dump();
  http.timeout_ms = profile_.timeout_ms;

  const auto t0 = std::chrono::steady_clock::now();
  HttpResponse resp;
  try {
    resp = transport_->send(http);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Timeout) fail(ErrorCode::ProviderTimeout, profile_.name);
    fail(ErrorCode::ProviderError, profile_.name + ": " + e.what());
  }
  const auto latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  if (resp.status == 408 || resp.status == 504) fail(ErrorCode::ProviderTimeout, profile_.name);
  if (resp.status < 200 || resp.status >= 300)
    fail(ErrorCode::ProviderError, profile_.name + ": HTTP " + std::to_string(resp.status));
  json j;
  try {
    j = json::parse(resp.body);
  } catch (const json::exception&) {
    fail(ErrorCode::ProviderError, profile_.name + ": response is not JSON");
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    fail(ErrorCode::ProviderError, profile_.name + ": no choices");
  const json& choice = j["choices"][0];
  const json& msg = choice.value("message", json::object());
  if (choice.value("finish_reason", "") == "content_filter" ||
      (msg.contains("refusal") && msg["refusal"].is_string() && !msg["refusal"].get<std::string>().empty()))
    fail(ErrorCode::ProviderRefusal, profile_.name);
  if (!msg.contains("content") || !msg["content"].is_string())
    fail(ErrorCode::ProviderError, profile_.name + ": no message content");
  return ChatResponse{msg["content"].get<std::string>(), profile_.name, latency};
}

void Gateway::add(ProviderProfile profile, std::shared_ptr<Provider> provider) {
  if (profile.name.empty()) fail(ErrorCode::ConfigError, "profile without name");
  if (profile.max_context_tokens <= 0) fail(ErrorCode::ConfigError, profile.name + ": max_context_tokens");
  std::lock_guard lock(mu_);
  auto l = std::make_unique<Lane>();
  l->profile = std::move(profile);
  l->provider = std::move(provider);
  const std::string name = l->profile.name;
  lanes_[name] = std::move(l);
}

bool Gateway::has(const std::string& profile) const {
  std::lock_guard lock(mu_);
  return lanes_.count(profile) > 0;
}

Gateway::Lane& Gateway::lane(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = lanes_.find(name);
  if (it == lanes_.end()) fail(ErrorCode::ConfigError, "unknown profile " + name);
  return *it->second;
}

const ProviderProfile& Gateway::profile(const std::string& name) const { return lane(name).profile; }

std::vector<std::string> Gateway::profile_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, _] : lanes_) out.push_back(name);
  return out;
}

ChatResponse Gateway::complete(const std::string& profile, const ChatRequest& req) {
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0))
    fail(ErrorCode::InvalidArgument, "temperature " + std::to_string(req.temperature));
  Lane& l = lane(profile);
  std::lock_guard serial(l.mu);
  if (l.last_start && l.profile.pacing.count() > 0) {
    const auto ready = *l.last_start + l.profile.pacing;
    const auto now = clock_.now();
    if (now < ready) clock_.sleep_for(std::chrono::ceil<std::chrono::milliseconds>(ready - now));
  }
  const auto start = clock_.now();
  l.last_start = start;
  auto record = [&] {
    std::lock_guard lock(mu_);
    calls_.push_back(Call{profile, start, clock_.now()});
  };
  try {
    ChatResponse resp = l.provider->complete(req);
    record();
    return resp;
  } catch (...) {
    record();
    throw;
  }
}

std::vector<Gateway::Call> Gateway::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t Gateway::call_count(const std::string& profile) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : calls_) n += c.profile == profile;
  return n;
}

ProviderProfile profile_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
    fail(ErrorCode::ConfigError, "profile: name required");
  ProviderProfile p;
  try {
    p.name = j["name"].get<std::string>();
    p.kind = j.value("kind", "scripted");
    p.base_url = j.value("base_url", "");
    p.model = j.value("model", p.name);
    p.api_key_env = j.value("api_key_env", "");
    p.max_context_tokens = j.value("max_context_tokens", 32768);
    p.pacing = std::chrono::milliseconds(j.value("pacing_ms", 0));
    p.timeout_ms = j.value("timeout_ms", 120000L);
    if (j.contains("capabilities")) {
      p.capabilities.web_search = j["capabilities"].value("web_search", false);
      p.capabilities.long_reasoning = j["capabilities"].value("long_reasoning", false);
    }
    if (j.contains("scenario")) {
      std::filesystem::path s = j["scenario"].get<std::string>();
      p.scenario = s.is_absolute() ? s : base_dir / s;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, "profile " + p.name + ": " + e.what());
  }
  if (p.kind != "scripted" && p.kind != "openai-compat")
    fail(ErrorCode::ConfigError, "profile " + p.name + ": unknown kind " + p.kind);
  if (p.kind == "openai-compat" && p.base_url.empty())
    fail(ErrorCode::ConfigError, "profile " + p.name + ": base_url required");
  if (p.max_context_tokens <= 0) fail(ErrorCode::ConfigError, "profile " + p.name + ": max_context_tokens");
  if (p.pacing.count() < 0) fail(ErrorCode::ConfigError, "profile " + p.name + ": pacing_ms");
  return p;
}

std::unique_ptr<Gateway> Gateway::from_config(const json& cfg, const std::filesystem::path& base_dir, Clock& clock,
                                              std::shared_ptr<HttpTransport> transport) {
  auto gw = std::make_unique<Gateway>(clock);
  if (!cfg.contains("profiles")) return gw;
  if (!cfg["profiles"].is_array()) fail(ErrorCode::ConfigError, "profiles must be an array");
  for (const auto& pj : cfg["profiles"]) {
    ProviderProfile p = profile_from_json(pj, base_dir);
    if (gw->has(p.name)) fail(ErrorCode::ConfigError, "duplicate profile " + p.name);
    std::shared_ptr<Provider> provider;
    if (p.kind == "scripted") {
      auto entries = p.scenario.empty() ? std::vector<ScriptedProvider::Entry>{}
                                        : ScriptedProvider::load_scenario_file(p.scenario);
      provider = std::make_shared<ScriptedProvider>(p.name, std::move(entries));
    } else {
      provider = std::make_shared<OpenAiCompatProvider>(p, transport);
    }
    gw->add(std::move(p), std::move(provider));
  }
  return gw;
}

}  // namespace orbit
