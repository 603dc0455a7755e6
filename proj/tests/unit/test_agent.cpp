#include <set>

#include "doctest.h"
#include "orbit/agent.hpp"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"
#include "test_support.hpp"

using namespace orbit;
using Entry = ScriptedProvider::Entry;

namespace {

ManualClock& test_clock() {
  static ManualClock c(parse_utc("2025-03-01T00:00:00Z"));
  return c;
}

// Records every query and answers from a fixed table.
class RecordingSearcher final : public Searcher {
 public:
  std::vector<std::string> queries;
  bool down = false;
  SearchResponse search(const std::string& query, int k) override {
    queries.push_back(query);
    if (down) fail(ErrorCode::AllBackendsFailed, query);
    SearchResponse r;
    for (int i = 0; i < k; ++i)
      r.results.push_back({"Title " + std::to_string(i), "snippet for " + query, "https://r.example/" + std::to_string(i),
                           "fixture", i + 1});
    return r;
  }
};

struct Agent {
  Gateway gw{test_clock()};
  TemplateSet templates = TemplateSet::builtin();
  std::shared_ptr<ScriptedProvider> model;
  explicit Agent(const std::vector<std::string>& emissions) {
    std::vector<Entry> entries;
    for (const auto& e : emissions) entries.push_back({Entry::Match::Any, "", e, ""});
    model = std::make_shared<ScriptedProvider>("agent", entries);
    gw.add(ProviderProfile{.name = "agent"}, model);
  }
  explicit Agent(const std::filesystem::path& scenario) {
    model = std::make_shared<ScriptedProvider>("agent", ScriptedProvider::load_scenario_file(scenario));
    gw.add(ProviderProfile{.name = "agent"}, model);
  }
};

struct CaseQuestion {
  std::string question;
  std::vector<std::string> golds;
};

CaseQuestion case_question(const std::string& id) {
  for (const auto& line : io::read_lines(orbit::testing::fixture_path("agent/case_questions.jsonl"))) {
    const auto j = nlohmann::json::parse(line);
    if (j["id"] == id) return {j["question"].get<std::string>(), j["golds"].get<std::vector<std::string>>()};
  }
  FAIL("no case " << id);
  return {};
}

Trajectory replay_case(const std::string& id) {
  Agent agent(orbit::testing::fixture_path("agent/" + id + "_scenario.json"));
  MetaSearchOptions opts;
  opts.cache_mode = CacheMode::Replay;
  MetaSearch search({}, test_clock(), opts,
                    std::make_shared<SearchCache>(orbit::testing::fixture_path("agent/" + id + "_search_cache.jsonl")));
  const auto q = case_question(id);
  return run_trajectory(id, q.question, q.golds, agent.gw, search, agent.templates, AgentConfig{});
}

}  // namespace

TEST_CASE("parse_action") {
  CHECK(parse_action("<think>plan</think>\n<search>geographic center of Wyoming</search>") ==
        std::vector<AgentAction>{{ActionKind::Think, "plan"}, {ActionKind::Search, "geographic center of Wyoming"}});
  CHECK(parse_action("<answer>Southeast</answer>") == std::vector<AgentAction>{{ActionKind::Answer, "Southeast"}});
  CHECK(parse_action("no tags at all") == std::vector<AgentAction>{{ActionKind::Malformed, "no tags at all"}});
  // first effective tag wins; later ones are ignored
  CHECK(parse_action("<search>q1</search><answer>x</answer><search>q2</search>") ==
        std::vector<AgentAction>{{ActionKind::Search, "q1"}});
  CHECK(parse_action("<SEARCH> spaced </SEARCH>").back() == AgentAction{ActionKind::Search, "spaced"});
  CHECK(parse_action("<search>unterminated").back().kind == ActionKind::Malformed);
  CHECK(parse_action("<answer>  </answer>").back().kind == ActionKind::Malformed);
  CHECK(parse_action("<think>a</think>").size() == 2);
}

TEST_CASE("format_observation") {
  std::vector<SearchResult> rs = {{"Wyoming State Capitol", "In Cheyenne.", "https://a/", "b", 1},
                                  {"Cheyenne, Wyoming", "Capital city.", "https://b/", "b", 2},
                                  {"Wyoming", "A state.", "https://c/", "b", 3}};
  const auto obs = format_observation(rs, 4096);
  CHECK(obs ==
        "<information>Doc 1 (Title: \"Wyoming State Capitol\"): In Cheyenne.\nDoc 2 (Title: \"Cheyenne, Wyoming\"): "
        "Capital city.\nDoc 3 (Title: \"Wyoming\"): A state.</information>");
  CHECK(format_observation({}, 100) == "<information>No results found.</information>");
  CHECK(format_observation(rs, 10) == "<information>[truncated]</information>");
  const auto two = format_observation(rs, 120);
  CHECK(two.find("Doc 2") != std::string::npos);
  CHECK(two.find("Doc 3") == std::string::npos);
  CHECK(text::ends_with(two, "\n[truncated]</information>"));
  // a token measure changes where the cut happens
  const auto by_words = format_observation(rs, 9, [](std::string_view s) { return text::whitespace_tokens(s); });
  CHECK(by_words.find("Doc 2") == std::string::npos);
}

TEST_CASE("EM scoring") {
  CHECK(score_em("Southeast", {"Southeast"}) == 1);
  CHECK(score_em("The Immense Journey", {"Immense Journey"}) == 1);
  CHECK(score_em("Beijing", {"Sydney and Athens"}) == 0);
  CHECK(normalize_answer("  The  U.S.A.! ") == "usa");
}

TEST_CASE("EM agrees with the reference normalizer on 50 cases") {
  const auto lines = io::read_lines(orbit::testing::fixture_path("em/cases.jsonl"));
  REQUIRE(lines.size() == 50);
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    const auto pred = j["predicted"].get<std::string>();
    CHECK_MESSAGE(normalize_answer(pred) == j["normalized"].get<std::string>(), pred);
    CHECK_MESSAGE(score_em(pred, j["golds"].get<std::vector<std::string>>()) == j["em"].get<int>(), pred);
  }
}

TEST_CASE("EM properties") {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const std::string x = orbit::testing::random_phrase(rng, 6);
    const std::string n = normalize_answer(x);
    CHECK(normalize_answer(n) == n);
    CHECK(score_em(x, {x}) == 1);
    const int s = score_em(x, std::vector<std::string>{orbit::testing::random_phrase(rng, 6)});
    CHECK((s == 0 || s == 1));
  }
}

TEST_CASE("FRAMES case-study replay") {
  const auto t = replay_case("frames");
  CHECK(t.termination == Termination::Answered);
  CHECK(t.search_count() == 3);
  CHECK(t.final_answer == "Southeast");
  CHECK(t.reward == 1);
  REQUIRE(t.turns[0].feedback);
  CHECK(t.turns[0].feedback->find("Doc 2 (Title: \"Cheyenne, Wyoming\")") != std::string::npos);
}

TEST_CASE("sunfish case-study replay") {
  const auto t = replay_case("orbit");
  CHECK(t.termination == Termination::Answered);
  CHECK(t.search_count() == 4);
  CHECK(t.final_answer == "The Immense Journey");
  CHECK(t.reward == 1);
}

TEST_CASE("turn budget") {
  std::vector<std::string> emissions;
  for (int i = 0; i < 20; ++i) emissions.push_back("<search>query " + std::to_string(i) + "</search>");
  Agent agent(emissions);
  RecordingSearcher searcher;
  const auto t = run_trajectory("q", "Q?", {"A"}, agent.gw, searcher, agent.templates, AgentConfig{});
  CHECK(t.termination == Termination::TurnBudget);
  CHECK(t.search_count() == 5);
  CHECK(searcher.queries.size() == 5);
  CHECK(t.reward == 0);
  CHECK_FALSE(t.final_answer);
}

TEST_CASE("malformed output gets one reminder") {
  SUBCASE("recovers") {
    Agent agent(std::vector<std::string>{"I think the answer is 5", "<answer>5</answer>"});
    RecordingSearcher searcher;
    const auto t = run_trajectory("q", "Q?", {"5"}, agent.gw, searcher, agent.templates, AgentConfig{});
    CHECK(t.termination == Termination::Answered);
    CHECK(t.reward == 1);
    REQUIRE(t.turns[0].feedback);
    CHECK(t.turns[0].feedback->find("My previous action is invalid") != std::string::npos);
    // the second prompt carried the reminder
    CHECK(agent.gw.calls().size() == 2);
  }
  SUBCASE("gives up") {
    Agent agent(std::vector<std::string>{"nothing", "still nothing", "<answer>never reached</answer>"});
    RecordingSearcher searcher;
    const auto t = run_trajectory("q", "Q?", {"x"}, agent.gw, searcher, agent.templates, AgentConfig{});
    CHECK(t.termination == Termination::Malformed);
    CHECK(t.reward == 0);
    CHECK(agent.model->remaining() == 1);
  }
}

TEST_CASE("duplicate queries") {
  const std::vector<std::string> emissions = {"<search>Capital of Wyoming</search>", "<search>capital  of wyoming</search>",
                                              "<search>other</search>", "<answer>Cheyenne</answer>"};
  SUBCASE("block") {
    Agent agent(emissions);
    RecordingSearcher searcher;
    const auto t = run_trajectory("q", "Q?", {"Cheyenne"}, agent.gw, searcher, agent.templates, AgentConfig{});
    CHECK(searcher.queries == std::vector<std::string>{"Capital of Wyoming", "other"});
    CHECK(t.search_count() == 3);  // the blocked turn is still a search action
    CHECK(t.turns[1].feedback->find("Duplicate search") != std::string::npos);
    std::set<std::string> norms;
    for (const auto& q : searcher.queries) CHECK(norms.insert(normalize_query(q)).second);
  }
  SUBCASE("warn") {
    Agent agent(emissions);
    RecordingSearcher searcher;
    AgentConfig cfg;
    cfg.duplicate_query_policy = DuplicateQueryPolicy::Warn;
    run_trajectory("q", "Q?", {"Cheyenne"}, agent.gw, searcher, agent.templates, cfg);
    CHECK(searcher.queries.size() == 3);
  }
  SUBCASE("endless duplicates still terminate") {
    Agent agent(std::vector<std::string>(30, "<search>same</search>"));
    RecordingSearcher searcher;
    const auto t = run_trajectory("q", "Q?", {"x"}, agent.gw, searcher, agent.templates, AgentConfig{});
    CHECK(t.termination == Termination::TurnBudget);
    CHECK(searcher.queries.size() == 1);
  }
}

TEST_CASE("search outage becomes an observation") {
  Agent agent(std::vector<std::string>{"<search>x</search>", "<answer>y</answer>"});
  RecordingSearcher searcher;
  searcher.down = true;
  const auto t = run_trajectory("q", "Q?", {"y"}, agent.gw, searcher, agent.templates, AgentConfig{});
  CHECK(t.termination == Termination::Answered);
  CHECK(t.turns[0].feedback->find("Search unavailable.") != std::string::npos);
}

TEST_CASE("invariants over random scripted models") {
  Rng rng(77);
  const std::vector<std::string> pool = {"<search>q" , "<answer>a</answer>", "junk", "<think>t</think>"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> emissions;
    for (int i = 0; i < 20; ++i) {
      const auto& p = pool[rng.index(pool.size())];
      emissions.push_back(p == "<search>q" ? "<search>q" + std::to_string(rng.index(4)) + "</search>" : p);
    }
    Agent agent(emissions);
    RecordingSearcher searcher;
    AgentConfig cfg;
    cfg.max_turns = 1 + static_cast<int>(rng.index(5));
    const auto t = run_trajectory("q", "Q?", {"a"}, agent.gw, searcher, agent.templates, cfg);
    CHECK(t.search_count() <= static_cast<std::size_t>(cfg.max_turns));
    CHECK(t.final_answer.has_value() == (t.termination == Termination::Answered));
    if (t.reward == 1) CHECK(t.termination == Termination::Answered);
    const auto back = parse_trajectory(render_trajectory(t));
    CHECK(back == t);
    CHECK(render_trajectory(back) == render_trajectory(t));
  }
}

TEST_CASE("trajectory export keeps segment boundaries") {
  const auto t = replay_case("frames");
  orbit::testing::TempDir dir;
  export_trajectories({t}, dir / "traj.jsonl");
  const auto j = nlohmann::json::parse(io::read_lines(dir / "traj.jsonl").at(0));
  CHECK(j["version"] == "orbit-traj/1");
  CHECK(j["reward"] == score_em(t.final_answer.value(), t.golds));
  const std::string text = j["text"];
  std::size_t cursor = 0;
  std::vector<std::string> kinds;
  for (const auto& seg : j["segments"]) {
    CHECK(seg["start"].get<std::size_t>() == cursor);
    cursor = seg["end"].get<std::size_t>();
    kinds.push_back(seg["kind"]);
  }
  CHECK(cursor == text.size());
  CHECK(kinds == std::vector<std::string>{"prompt", "model_text", "observation", "model_text", "observation",
                                          "model_text", "observation", "model_text"});
  const auto& obs = j["segments"][2];
  const auto span = text.substr(obs["start"].get<std::size_t>(), obs["end"].get<std::size_t>() - obs["start"].get<std::size_t>());
  CHECK(text::trim(span).rfind("<information>", 0) == 0);
  CHECK(import_trajectories(dir / "traj.jsonl") == std::vector<Trajectory>{t});
  CHECK_THROWS_AS(parse_trajectory(R"({"version":"other"})"), Error);
}

TEST_CASE("agent config validation") {
  AgentConfig cfg;
  cfg.top_k = 0;
  CHECK_THROWS_AS(validate_agent_config(cfg), Error);
  CHECK_NOTHROW(validate_agent_config(AgentConfig{}));
}
