#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/llm.hpp"
#include "orbit/templates.hpp"
#include "test_support.hpp"

using namespace orbit;
using namespace std::chrono_literals;
using Entry = ScriptedProvider::Entry;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("generation prompt embeds the seed and a shuffled exemplar") {
  const auto set = TemplateSet::builtin();
  Rng rng(7);
  const std::string prompt = set.render("generation", {{"seed", "The Emoji Movie"}}, &rng);
  CHECK(prompt.find("The question should have a unique answer.") != std::string::npos);
  CHECK(prompt.find("SEED: The Emoji Movie") != std::string::npos);
  CHECK(prompt.find("{exemplar}") == std::string::npos);
  CHECK(prompt.find("<inverted_question>") != std::string::npos);
  Rng again(7);
  CHECK(set.render("generation", {{"seed", "The Emoji Movie"}}, &again) == prompt);
}

TEST_CASE("exemplar choice follows the rng") {
  const auto set = TemplateSet::builtin();
  REQUIRE(set.exemplar_pool("generation").size() >= 2);
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    seen.insert(set.render("generation", {{"seed", "x"}}, &rng));
  }
  CHECK(seen.size() == set.exemplar_pool("generation").size());
}

TEST_CASE("template errors") {
  auto set = TemplateSet::builtin();
  CHECK(code_of([&] { set.render("nope", {}); }) == ErrorCode::UnknownTemplate);
  try {
    set.render("self_verify", {{"answer", "a"}});
    FAIL("expected UnboundPlaceholder");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnboundPlaceholder);
    CHECK(e.detail() == "question");
  }
}

TEST_CASE("placeholder syntax leaves other braces alone and does not rescan values") {
  TemplateSet set;
  set.set("t", "{a} {B} {} {a-b} {{a}} {a");
  CHECK(placeholders(set.raw("t")) == std::vector<std::string>{"a"});
  CHECK(set.render("t", {{"a", "{a}"}}) == "{a} {B} {} {a-b} {{a}} {a");
}

TEST_CASE("every builtin template is bound by its known variables") {
  const auto set = TemplateSet::builtin();
  const std::map<std::string, std::vector<std::string>> expected = {
      {"generation", {"exemplar", "seed"}},
      {"self_verify", {"question", "answer"}},
      {"self_verify_classifier", {"question", "answer", "report"}},
      {"judge_answer", {"question", "evidence"}},
      {"judge_verdict", {"question", "ground_truth_answer", "predicted_answer"}},
      {"agent", {"question"}},
      {"answer_type", {"question", "answer"}},
      {"decompose", {"question"}},
  };
  for (const auto& [id, vars] : expected) {
    auto ph = placeholders(set.raw(id));
    std::sort(ph.begin(), ph.end());
    auto want = vars;
    std::sort(want.begin(), want.end());
    CHECK_MESSAGE(ph == want, id);
  }
}

TEST_CASE("scripted provider replays and then reports exhaustion") {
  ManualClock clock;
  Gateway gw(clock);
  auto p = std::make_shared<ScriptedProvider>("s", std::vector<Entry>{{Entry::Match::Contains, "hello", "canned", ""}});
  gw.add(ProviderProfile{.name = "s"}, p);
  ChatRequest req;
  req.user = "say hello";
  CHECK(gw.complete("s", req).text == "canned");
  CHECK(code_of([&] { gw.complete("s", req); }) == ErrorCode::ScenarioExhausted);
}

TEST_CASE("scripted matchers") {
  ChatRequest a, b;
  a.user = "alpha";
  b.user = "beta";
  ScriptedProvider p("s", {{Entry::Match::Sha256, sha256_hex("beta"), "B", ""},
                           {Entry::Match::Contains, "alp", "A", ""},
                           {Entry::Match::Any, "", "", "timeout"}});
  CHECK(p.complete(a).text == "A");
  CHECK(p.complete(b).text == "B");
  CHECK(code_of([&] { p.complete(a); }) == ErrorCode::ProviderTimeout);
  ScriptedProvider q("q", {{Entry::Match::Contains, "zzz", "Z", ""}});
  CHECK(code_of([&] { q.complete(a); }) == ErrorCode::UnmatchedRequest);
  ScriptedProvider r("r", {{Entry::Match::Any, "", "", "refusal"}});
  CHECK(code_of([&] { r.complete(a); }) == ErrorCode::ProviderRefusal);
}

TEST_CASE("scenario files") {
  const auto entries = ScriptedProvider::load_scenario(nlohmann::json::parse(
      R"({"entries":[{"match":{"contains":"x"},"response":"y"},{"match":{"any":true},"error":"timeout"}]})"));
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].match == Entry::Match::Contains);
  CHECK(entries[1].error == "timeout");
  CHECK(code_of([] { ScriptedProvider::load_scenario(nlohmann::json::parse(R"({"entries":[{"match":{"regex":"x"}}]})")); }) ==
        ErrorCode::ConfigError);
}

TEST_CASE("temperature range is enforced") {
  ManualClock clock;
  Gateway gw(clock);
  gw.add(ProviderProfile{.name = "s"}, std::make_shared<ScriptedProvider>("s", std::vector<Entry>{{}}));
  ChatRequest req;
  req.temperature = 2.5;
  CHECK(code_of([&] { gw.complete("s", req); }) == ErrorCode::InvalidArgument);
  req.temperature = -0.1;
  CHECK(code_of([&] { gw.complete("s", req); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { gw.complete("missing", ChatRequest{}); }) == ErrorCode::ConfigError);
}

TEST_CASE("pacing spaces request starts on the wall clock") {
  SystemClock clock;
  Gateway gw(clock);
  ProviderProfile prof{.name = "paced"};
  prof.pacing = 2000ms;
  gw.add(prof, std::make_shared<ScriptedProvider>("paced", std::vector<Entry>{{}, {}}));
  const auto t0 = std::chrono::steady_clock::now();
  gw.complete("paced", ChatRequest{});
  gw.complete("paced", ChatRequest{});
  CHECK(std::chrono::steady_clock::now() - t0 >= 2000ms);
  const auto calls = gw.calls();
  REQUIRE(calls.size() == 2);
  CHECK(calls[1].start - calls[0].start >= 2000ms);
}

namespace {

// Provider that records overlap between concurrent calls.
class OverlapProbe final : public Provider {
 public:
  ChatResponse complete(const ChatRequest&) override {
    const int now = ++in_flight_;
    max_seen_ = std::max(max_seen_.load(), now);
    std::this_thread::sleep_for(2ms);
    --in_flight_;
    return {"ok", "probe", 0};
  }
  std::atomic<int> in_flight_{0}, max_seen_{0};
};

}  // namespace

TEST_CASE("one profile never has two requests in flight") {
  SystemClock clock;
  Gateway gw(clock);
  auto probe = std::make_shared<OverlapProbe>();
  auto other = std::make_shared<OverlapProbe>();
  gw.add(ProviderProfile{.name = "a"}, probe);
  gw.add(ProviderProfile{.name = "b"}, other);
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { gw.complete(i % 2 ? "a" : "b", ChatRequest{}); });
  for (auto& t : ts) t.join();
  CHECK(probe->max_seen_ == 1);
  CHECK(other->max_seen_ == 1);
  CHECK(gw.call_count("a") == 4);
}

TEST_CASE("openai-compatible provider against a local server") {
  httplib::Server server;
  std::string seen_auth, seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    const auto j = nlohmann::json::parse(req.body);
    if (j["messages"].back()["content"] == "refuse") {
      res.set_content(R"({"choices":[{"message":{"content":null,"refusal":"no"},"finish_reason":"stop"}]})",
                      "application/json");
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"},"finish_reason":"stop"}]})",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  setenv("ORBIT_TEST_KEY", "sekret", 1);
  ProviderProfile prof;
  prof.name = "remote";
  prof.kind = "openai-compat";
  prof.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  prof.model = "judge-small";
  prof.api_key_env = "ORBIT_TEST_KEY";
  OpenAiCompatProvider provider(prof, nullptr);
  ChatRequest req;
  req.user = "ping";
  req.temperature = 0;
  CHECK(provider.complete(req).text == "pong");
  CHECK(seen_auth == "Bearer sekret");
  const auto body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "judge-small");
  CHECK(body["temperature"] == 0.0);
  req.user = "refuse";
  CHECK(code_of([&] { provider.complete(req); }) == ErrorCode::ProviderRefusal);
  prof.base_url = "http://127.0.0.1:" + std::to_string(port) + "/missing";
  OpenAiCompatProvider broken(prof, nullptr);
  CHECK(code_of([&] { broken.complete(req); }) == ErrorCode::ProviderError);
  server.stop();
  th.join();
}

TEST_CASE("gateway from config") {
  orbit::testing::TempDir dir;

  {
    std::ofstream(dir / "s.json") << R"({"entries":[{"match":{"any":true},"response":"hi"}]})";
  }
  ManualClock clock;
  const auto cfg = nlohmann::json::parse(R"({"profiles":[
      {"name":"gen","kind":"scripted","scenario":"s.json","model":"gen-model","pacing_ms":10,
       "capabilities":{"web_search":true}},
      {"name":"judge","kind":"openai-compat","base_url":"http://127.0.0.1:1","model":"j"}]})");
  auto gw = Gateway::from_config(cfg, dir.path(), clock);
  CHECK(gw->profile("gen").model == "gen-model");
  CHECK(gw->profile("gen").capabilities.web_search);
  CHECK(gw->complete("gen", ChatRequest{}).text == "hi");
  CHECK(code_of([&] {
          Gateway::from_config(nlohmann::json::parse(R"({"profiles":[{"name":"x","kind":"carrier-pigeon"}]})"),
                               dir.path(), clock);
        }) == ErrorCode::ConfigError);
}
