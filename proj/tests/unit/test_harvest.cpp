#include <fstream>
#include <map>

#include "doctest.h"
#include "orbit/error.hpp"
#include "orbit/harvest.hpp"
#include "test_support.hpp"

using namespace orbit;
using namespace std::chrono_literals;

namespace {

struct WikiEnv {
  ManualClock clock;
  FixtureTransport transport{&clock};
  HostRateLimiter limiter{clock, 1000ms};
  WikiApiClient client{transport, limiter, clock};
  WikiEnv() { transport.load_routes(orbit::testing::fixture_path("wiki/routes.json")); }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::vector<Seed> fake_category(Domain d, const std::string& cat, int n, const std::string& prefix) {
  std::vector<Seed> out;
  for (int i = 0; i < n; ++i) out.push_back({d, cat, prefix + std::to_string(i), std::nullopt});
  return out;
}

}  // namespace

TEST_CASE("catalog parsing") {
  SUBCASE("tsv with comments, prefixes and duplicates") {
    const auto specs = parse_catalog(
        "# domain\tcategory\n"
        "TV Shows & Movies\tCategory:2017 animated films\n"
        "\n"
        "TV Shows & Movies\t2017 animated films\n"
        "Science & Technology\tSpace telescopes\t3\n");
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].category == "Category:2017 animated films");
    CHECK(specs[1].max_pages == 3);
  }
  SUBCASE("empty file") { CHECK(parse_catalog("").empty()); }
  SUBCASE("json array") {
    const auto specs = parse_catalog(R"([{"domain":"Art","category":"Category:Cubism","max_pages":4}])");
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].domain == Domain::Art);
  }
  SUBCASE("malformed rows name their line") {
    try {
      parse_catalog("Art\tCategory:Cubism\nCooking\tCategory:Soups\n");
      FAIL("expected MalformedCatalog");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCatalog);
      CHECK(e.detail().rfind("line 2", 0) == 0);
    }
    CHECK(code_of([] { parse_catalog("Art only one column\n"); }) == ErrorCode::MalformedCatalog);
    CHECK(code_of([] { parse_catalog("Art\tCategory:X\tmany\n"); }) == ErrorCode::MalformedCatalog);
  }
  SUBCASE("missing file") { CHECK(code_of([] { load_catalog("/nonexistent/catalog.tsv"); }) == ErrorCode::MissingFile); }
}

TEST_CASE("15 domains x 100 categories") {
  std::string tsv;
  for (Domain d : all_domains()) {
    for (int i = 0; i < 100; ++i) tsv += std::string(to_string(d)) + "\tCategory:Topic " + std::to_string(i) + "\n";
  }
  CHECK(parse_catalog(tsv).size() == 1500);
}

TEST_CASE("category expansion against the captured fixture") {
  WikiEnv env;
  const auto seeds =
      expand_category({Domain::TvShowsMovies, "Category:2017 animated films", std::nullopt}, env.client);
  CHECK(seeds.size() == 14);
  CHECK(std::any_of(seeds.begin(), seeds.end(), [](const Seed& s) { return s.page_title == "The Emoji Movie"; }));
  CHECK(seeds[0].page_id.has_value());
  // pagination was followed: 3 pages of members
  std::size_t member_calls = 0;
  for (const auto& c : env.transport.calls()) member_calls += c.url.find("categorymembers") != std::string::npos;
  CHECK(member_calls == 3);
  // pacing: consecutive grants for the host are >= 1 s apart
  const auto grants = env.limiter.grants();
  for (std::size_t i = 1; i < grants.size(); ++i) CHECK(grants[i].second - grants[i - 1].second >= 1000ms);
}

TEST_CASE("max_pages caps expansion") {
  WikiEnv env;
  CHECK(expand_category({Domain::TvShowsMovies, "Category:2017 animated films", 7}, env.client).size() == 7);
}

TEST_CASE("empty and missing categories") {
  WikiEnv env;
  CHECK(expand_category({Domain::Art, "Category:Empty fixture category", std::nullopt}, env.client).empty());
  CHECK(code_of([&] {
          expand_category({Domain::Art, "Category:No such category anywhere", std::nullopt}, env.client);
        }) == ErrorCode::CategoryNotFound);
}

TEST_CASE("retries with exponential backoff, then RateLimited") {
  ManualClock clock;
  FixtureTransport t(&clock);
  HostRateLimiter limiter(clock, 1000ms);
  WikiApiClient client(t, limiter, clock);
  HttpResponse limited;
  limited.status = 429;
  t.route_sequence(client.query_url({{"action", "query"},
                                     {"format", "json"},
                                     {"list", "categorymembers"},
                                     {"cmtitle", "Category:Busy"},
                                     {"cmnamespace", "0"},
                                     {"cmlimit", "500"}}),
                   {limited});
  try {
    client.category_members("Category:Busy", 0);
    FAIL("expected RateLimited");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RateLimited);
  }
  CHECK(clock.sleeps() == std::vector<std::chrono::milliseconds>{2000ms, 4000ms, 8000ms});
  CHECK(t.calls().size() == 4);
}

TEST_CASE("transient 503 recovers") {
  ManualClock clock;
  FixtureTransport t(&clock);
  HostRateLimiter limiter(clock, 1000ms);
  WikiApiClient client(t, limiter, clock);
  HttpResponse busy;
  busy.status = 503;
  const auto ok = FixtureTransport::json(R"({"query":{"categorymembers":[{"pageid":1,"ns":0,"title":"A"}]}})");
  t.route_sequence(client.query_url({{"action", "query"},
                                     {"format", "json"},
                                     {"list", "categorymembers"},
                                     {"cmtitle", "Category:Flaky"},
                                     {"cmnamespace", "0"},
                                     {"cmlimit", "500"}}),
                   {busy, ok});
  CHECK(client.category_members("Category:Flaky", 0).size() == 1);
  HttpResponse gone;
  gone.status = 403;
  t.route_sequence(client.query_url({{"action", "query"},
                                     {"format", "json"},
                                     {"list", "categorymembers"},
                                     {"cmtitle", "Category:Forbidden"},
                                     {"cmnamespace", "0"},
                                     {"cmlimit", "500"}}),
                   {gone});
  CHECK(code_of([&] { client.category_members("Category:Forbidden", 0); }) == ErrorCode::ApiError);
}

TEST_CASE("round-robin interleave") {
  SUBCASE("shared page appears once") {
    auto a = fake_category(Domain::Art, "Category:A", 2, "p");
    auto b = fake_category(Domain::Art, "Category:B", 2, "p");
    CHECK(interleave_seeds({a, b}, std::nullopt).size() == 2);
  }
  SUBCASE("budget 30 over 3 categories of 100 gives 10 each") {
    std::vector<std::vector<Seed>> cats;
    for (int c = 0; c < 3; ++c)
      cats.push_back(fake_category(Domain::History, "Category:" + std::to_string(c), 100, "c" + std::to_string(c) + "-"));
    const auto seeds = interleave_seeds(cats, 30);
    std::map<std::string, int> per;
    for (const auto& s : seeds) ++per[s.category];
    CHECK(seeds.size() == 30);
    for (const auto& [cat, n] : per) CHECK(n == 10);
  }
}

TEST_CASE("balance property: per-category counts differ by at most one") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.index(6);
    std::vector<std::vector<Seed>> cats;
    std::size_t total = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const int n = 20 + static_cast<int>(rng.index(30));
      total += n;
      cats.push_back(fake_category(Domain::Music, "Category:" + std::to_string(c), n, std::to_string(c) + ":"));
    }
    // budgets small enough that every category stays live
    const std::size_t budget = rng.index(20 * k + 1);
    const auto seeds = interleave_seeds(cats, budget);
    CHECK(seeds.size() == std::min(budget, total));
    std::map<std::string, int> per;
    for (const auto& c : cats) per[c[0].category] = 0;
    for (const auto& s : seeds) ++per[s.category];
    int lo = 1 << 30, hi = 0;
    for (const auto& [_, n] : per) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("harvest logs failed categories and stays deterministic") {
  const std::vector<CategorySpec> catalog = {
      {Domain::TvShowsMovies, "Category:2017 animated films", std::nullopt},
      {Domain::ScienceTechnology, "Category:Space telescopes", std::nullopt},
      {Domain::Art, "Category:No such category anywhere", std::nullopt},
  };
  auto run = [&] {
    WikiEnv env;
    return harvest(catalog, env.client, HarvestLimits{20, 0, 3}, env.clock);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.seeds == b.seeds);
  CHECK(a.source_log == b.source_log);
  CHECK(a.seeds.size() == 20);
  REQUIRE(a.source_log.size() == 3);
  CHECK(a.source_log[2].page_count == -1);
  CHECK(a.source_log[0].page_count == 14);
  std::map<std::string, int> per;
  for (const auto& s : a.seeds) ++per[s.category];
  CHECK(per["Category:2017 animated films"] == 10);
  CHECK(per["Category:Space telescopes"] == 10);
  for (const auto& e : a.source_log) CHECK(parse_source_entry(render_source_entry(e)) == e);
}
