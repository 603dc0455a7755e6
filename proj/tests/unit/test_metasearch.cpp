#include <atomic>
#include <set>
#include <thread>

#include "doctest.h"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/metasearch.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"
#include "test_support.hpp"

using namespace orbit;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<SearchBackend> fixture(const std::string& name, const std::string& file, int priority) {
  return FixtureBackend::load({name, "fixture", orbit::testing::fixture_path("search/" + file).string(), priority});
}

std::shared_ptr<SearchBackend> inline_backend(const std::string& name, int priority, const nlohmann::json& j) {
  return std::make_shared<FixtureBackend>(SearchBackendSpec{name, "fixture", "", priority}, j);
}

ManualClock& test_clock() {
  static ManualClock c(parse_utc("2025-03-01T00:00:00Z"));
  return c;
}

// Naive merge: walk every list in order, keep a URL the first time it is
// seen, stop at k.
std::vector<std::string> oracle_merge(const std::vector<std::vector<SearchResult>>& lists, int k) {
  std::vector<std::string> keys, urls;
  for (const auto& l : lists)
    for (const auto& r : l) {
      const std::string key = normalize_url_key(r.url);
      if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
      keys.push_back(key);
      urls.push_back(r.url);
    }
  if (static_cast<int>(urls.size()) > k) urls.resize(k);
  return urls;
}

}  // namespace

TEST_CASE("capital of Wyoming returns five results with Cheyenne") {
  MetaSearch ms({fixture("google", "frames.json", 0), fixture("wikipedia", "wiki_tier.json", 1)}, test_clock());
  const auto resp = ms.search("capital of Wyoming", 5);
  REQUIRE(resp.results.size() == 5);
  bool found = false;
  for (std::size_t i = 0; i < resp.results.size(); ++i) {
    CHECK(resp.results[i].rank == static_cast<int>(i) + 1);
    found |= resp.results[i].title == "Cheyenne, Wyoming";
  }
  CHECK(found);
  CHECK(resp.served_by == std::vector<std::string>{"google"});
  CHECK_FALSE(resp.downgraded);
}

TEST_CASE("top tier down: lower tier serves and the downgrade is reported") {
  MetaSearch ms({fixture("google", "down.json", 0), fixture("wikipedia", "wiki_tier.json", 1)}, test_clock());
  const auto resp = ms.search("capital of Wyoming", 5);
  REQUIRE(resp.results.size() == 3);
  for (const auto& r : resp.results) CHECK(r.backend == "wikipedia");
  CHECK(resp.downgraded);
  CHECK(resp.failures.count("google") == 1);
  CHECK(resp.failures.at("google").find("Timeout") == 0);
}

TEST_CASE("all backends down") {
  MetaSearch ms({fixture("a", "down.json", 0), inline_backend("b", 1, {{"error", "503"}})}, test_clock());
  CHECK_THROWS_WITH_AS(ms.search("x", 5), doctest::Contains("AllBackendsFailed"), Error);
  MetaSearch none({}, test_clock());
  CHECK_THROWS_AS(none.search("x", 5), Error);
}

TEST_CASE("input validation") {
  MetaSearch ms({fixture("google", "frames.json", 0)}, test_clock());
  CHECK_THROWS_WITH_AS(ms.search("   ", 5), doctest::Contains("EmptyQuery"), Error);
  CHECK_THROWS_AS(ms.search("q", 0), Error);
  // backends that know nothing return an empty, non-failing answer
  CHECK(ms.search("unknown query", 5).results.empty());
}

TEST_CASE("duplicate URL keeps the higher tier's rank") {
  const nlohmann::json a = {{"queries", {{"q", {{{"title", "A1"}, {"url", "https://x.example/1"}},
                                                 {{"title", "A2"}, {"url", "https://x.example/shared"}}}}}}};
  const nlohmann::json b = {{"queries", {{"q", {{{"title", "B1"}, {"url", "https://www.x.example/shared/"}},
                                                 {{"title", "B2"}, {"url", "https://x.example/3"}}}}}}};
  MetaSearch ms({inline_backend("low", 1, b), inline_backend("high", 0, a)}, test_clock());
  const auto resp = ms.search("q", 10);
  REQUIRE(resp.results.size() == 3);
  CHECK(resp.results[1].title == "A2");
  CHECK(resp.results[1].rank == 2);
  CHECK(resp.results[2].title == "B2");
  CHECK(resp.served_by == std::vector<std::string>{"high", "low"});
}

TEST_CASE("merge matches a naive oracle on 1000 random inputs") {
  Rng rng(42);
  for (int t = 0; t < 1000; ++t) {
    const int k = 1 + static_cast<int>(rng.index(8));
    std::vector<std::vector<SearchResult>> lists(1 + rng.index(4));
    for (std::size_t b = 0; b < lists.size(); ++b) {
      for (std::size_t i = rng.index(7); i > 0; --i) {
        std::string url = "https://" + std::string(rng.index(2) ? "www." : "") + "h" + std::to_string(rng.index(3)) +
                          ".example/p" + std::to_string(rng.index(6)) + (rng.index(2) ? "/" : "");
        lists[b].push_back({"t", "s", url, "b" + std::to_string(b), static_cast<int>(lists[b].size()) + 1});
      }
    }
    const auto merged = merge_results(lists, k);
    const auto expected = oracle_merge(lists, k);
    REQUIRE(merged.size() == expected.size());
    std::set<std::string> keys;
    for (std::size_t i = 0; i < merged.size(); ++i) {
      CHECK(merged[i].url == expected[i]);
      CHECK(merged[i].rank == static_cast<int>(i) + 1);
      keys.insert(normalize_url_key(merged[i].url));
    }
    CHECK(keys.size() == merged.size());
    CHECK(static_cast<int>(merged.size()) <= k);
    // fallback totality
    bool any = false;
    for (const auto& l : lists) any |= !l.empty();
    CHECK(merged.empty() != any);
  }
}

TEST_CASE("snippets are capped at 400 code points") {
  std::string long_snippet;
  for (int i = 0; i < 300; ++i) long_snippet += "\xC3\xA9 ";
  MetaSearch ms({inline_backend("a", 0, {{"queries", {{"q", {{{"title", "t"}, {"snippet", long_snippet},
                                                                {"url", "https://a.example/"}}}}}}})},
                test_clock());
  const auto r = ms.search("q", 5).results.at(0);
  CHECK(text::utf8_length(r.snippet) == kSnippetMaxChars);
  CHECK(text::is_valid_utf8(r.snippet));
}

TEST_CASE("slow backend is cut off at the deadline") {
  MetaSearchOptions opts;
  opts.backend_timeout = 150ms;
  MetaSearch ms({inline_backend("slow", 0, {{"delay_ms", 3000}, {"queries", {{"q", {{{"url", "https://s.example/"}}}}}}}),
                 inline_backend("fast", 1, {{"queries", {{"q", {{{"url", "https://f.example/"}}}}}}})},
                test_clock(), opts);
  const auto start = std::chrono::steady_clock::now();
  const auto resp = ms.search("q", 5);
  CHECK(std::chrono::steady_clock::now() - start < 1500ms);
  REQUIRE(resp.results.size() == 1);
  CHECK(resp.results[0].backend == "fast");
  CHECK(resp.downgraded);
}

TEST_CASE("cache record and replay") {
  orbit::testing::TempDir dir;
  auto cache = std::make_shared<SearchCache>(dir / "search.jsonl");
  MetaSearchOptions rec;
  rec.cache_mode = CacheMode::Record;
  MetaSearch live({fixture("google", "frames.json", 0)}, test_clock(), rec, cache);
  const auto first = live.search("capital of Wyoming", 5);
  CHECK_FALSE(first.from_cache);
  CHECK(cache->size() == 1);

  MetaSearchOptions rep;
  rep.cache_mode = CacheMode::Replay;
  // a fresh cache object reads the file back; no backends at all
  MetaSearch replay({}, test_clock(), rep, std::make_shared<SearchCache>(dir / "search.jsonl"));
  const auto again = replay.search("  Capital   of WYOMING ", 5);
  CHECK(again.from_cache);
  CHECK(again.results == first.results);
  CHECK_THROWS_WITH_AS(replay.search("capital of Wyoming", 3), doctest::Contains("ReplayMiss"), Error);
  CHECK_THROWS_WITH_AS(replay.search("unseen", 5), doctest::Contains("ReplayMiss"), Error);

  const auto line = nlohmann::json::parse(io::read_file(dir / "search.jsonl"));
  CHECK(line["query_norm"] == "capital of wyoming");
  CHECK(line["k"] == 5);
  CHECK(line["ts"] == "2025-03-01T00:00:00Z");
  CHECK(line["results"].size() == 5);
}

TEST_CASE("concurrent searches share the cache safely") {
  orbit::testing::TempDir dir;
  auto cache = std::make_shared<SearchCache>(dir / "c.jsonl");
  MetaSearchOptions rec;
  rec.cache_mode = CacheMode::Record;
  nlohmann::json queries = nlohmann::json::object();
  for (int i = 0; i < 40; ++i) queries["q" + std::to_string(i)] = {{{"url", "https://e.example/" + std::to_string(i)}}};
  MetaSearch ms({inline_backend("a", 0, {{"queries", queries}})}, test_clock(), rec, cache);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (int i = t; i < 40; i += 8) ok += ms.search("q" + std::to_string(i), 3).results.size() == 1;
    });
  for (auto& th : threads) th.join();
  CHECK(ok == 40);
  CHECK(SearchCache(dir / "c.jsonl").size() == 40);
}

TEST_CASE("html scrape parsing") {
  const auto results = parse_ddg_html(orbit::testing::read_fixture("search/ddg_capital.html"), "ddg", 5);
  REQUIRE(results.size() == 3);
  CHECK(results[0].url == "https://en.wikipedia.org/wiki/Cheyenne,_Wyoming");
  CHECK(results[0].title == "Cheyenne, Wyoming - Wikipedia");
  CHECK(results[0].snippet == "Cheyenne is the capital and most populous city of the U.S. state of Wyoming.");
  CHECK(results[1].title == "Wyoming State Capitol & grounds");
  CHECK(results[1].snippet.empty());
  CHECK(results[2].url == "https://www.britannica.com/place/Cheyenne-Wyoming");
  CHECK(parse_ddg_html(orbit::testing::read_fixture("search/ddg_capital.html"), "ddg", 1).size() == 1);
  CHECK(parse_ddg_html("<html>nothing</html>", "ddg", 5).empty());
}

TEST_CASE("html scrape and wiki backends over a fixture transport") {
  auto transport = std::make_shared<FixtureTransport>();
  transport->route("https://html.duckduckgo.com/html/?q=capital%20of%20Wyoming",
                   FixtureTransport::html(orbit::testing::read_fixture("search/ddg_capital.html")));
  transport->route(
      "https://en.wikipedia.org/w/api.php?action=query&format=json&list=search&srsearch=capital%20of%20Wyoming&srlimit=5",
      FixtureTransport::json(R"({"query":{"search":[{"title":"Cheyenne, Wyoming","snippet":"<span class=\"searchmatch\">Capital</span> of &quot;Wyoming&quot;"}]}})"));
  std::vector<std::shared_ptr<SearchBackend>> backends;
  for (const auto& spec : default_backend_specs()) backends.push_back(make_backend(spec, transport));
  MetaSearch ms(backends, test_clock());
  const auto resp = ms.search("capital of Wyoming", 5);
  REQUIRE(resp.results.size() == 3);  // the wiki hit duplicates the first ddg result
  CHECK(resp.served_by == std::vector<std::string>{"duckduckgo"});

  WikiApiBackend wiki({"wikipedia", "wiki-api", "https://en.wikipedia.org/w/api.php", 0}, transport);
  const auto hits = wiki.search("capital of Wyoming", 5, 1000ms);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].snippet == "Capital of \"Wyoming\"");
  CHECK(hits[0].url == "https://en.wikipedia.org/wiki/Cheyenne,_Wyoming");
}

TEST_CASE("search facade round trip over HTTP") {
  MetaSearch ms({fixture("google", "frames.json", 0)}, test_clock());
  SearchServer server(ms);
  const int port = server.bind("127.0.0.1");
  std::thread serving([&] { server.run(); });

  auto [status, body] = handle_search_request(ms, R"({"query":"capital of Wyoming","topk":2})");
  CHECK(status == 200);
  const auto j = nlohmann::json::parse(body);
  REQUIRE(j["results"].size() == 2);
  CHECK(j["results"][0].size() == 3);  // title, snippet, url only
  CHECK(handle_search_request(ms, "not json").first == 400);
  CHECK(handle_search_request(ms, R"({"query":""})").first == 400);
  CHECK(handle_search_request(ms, R"({"query":"x","topk":"5"})").first == 400);

  auto transport = std::make_shared<CurlTransport>();
  JsonApiBackend client({"facade", "json-api", "http://127.0.0.1:" + std::to_string(port) + "/search", 0}, transport);
  const auto results = client.search("capital of Wyoming", 5, 5000ms);
  REQUIRE(results.size() == 5);
  CHECK(results[1].title == "Cheyenne, Wyoming");
  CHECK(results[1].backend == "facade");
  server.stop();
  serving.join();
}

TEST_CASE("backend config") {
  const auto cfg = nlohmann::json::parse(R"({"backends":[
      {"name":"wiki","kind":"fixture","endpoint":"search/wiki_tier.json","priority":5},
      {"name":"main","kind":"fixture","endpoint":"search/frames.json","priority":1}]})");
  const auto backends = backends_from_config(cfg, orbit::testing::fixture_path(""), nullptr);
  MetaSearch ms(backends, test_clock());
  CHECK(ms.backends().front()->spec().name == "main");
  CHECK_THROWS_AS(backends_from_config(nlohmann::json::parse(R"({"backends":[{"name":"x","kind":"gopher","endpoint":"e"}]})"),
                                       ".", std::make_shared<FixtureTransport>()),
                  Error);
  CHECK(parse_cache_mode("replay") == CacheMode::Replay);
  CHECK_THROWS_AS(parse_cache_mode("sometimes"), Error);
}
