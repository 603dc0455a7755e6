#include <chrono>
#include <set>
#include <thread>

#include "doctest.h"
#include "orbit/clock.hpp"
#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/http.hpp"
#include "orbit/io.hpp"
#include "orbit/parallel.hpp"
#include "orbit/rate_limiter.hpp"
#include "orbit/rng.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"
#include "test_support.hpp"

using namespace orbit;
using namespace std::chrono_literals;

TEST_CASE("text helpers") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::collapse_whitespace("  a \t\n b\xC2\xA0 c  ") == "a b c");
  CHECK(text::split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
  CHECK(text::split_lines("a\r\nb\n\nc") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(text::utf8_length("héllo🎬") == 6);
  CHECK(text::utf8_truncate("héllo", 2) == "hé");
  CHECK(text::decode_entities("a &amp; b &lt;c&gt; &#233; &#x1F600; &bogus; &") == "a & b <c> é 😀 &bogus; &");
  CHECK(text::escape_xml("<a&b>") == "&lt;a&amp;b&gt;");
  CHECK(text::latin1_to_utf8("caf\xE9") == "café");
  CHECK(text::sanitize_utf8("ok\xFF") == "ok\xEF\xBF\xBD");
  CHECK(text::whitespace_tokens(" 86  minutes ") == 2);
}

TEST_CASE("sanitize_utf8 always yields valid UTF-8") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) CHECK(text::is_valid_utf8(text::sanitize_utf8(orbit::testing::random_bytes(rng, 40))));
}

TEST_CASE("url parsing and normalization") {
  const auto u = parse_http_url("HTTPS://En.Wikipedia.org:443/wiki/X?y=1#frag");
  REQUIRE(u);
  CHECK(u->host == "en.wikipedia.org");
  CHECK(u->path == "/wiki/X");
  CHECK(u->query == "y=1");
  CHECK(u->fragment == "frag");
  CHECK_FALSE(parse_http_url("ftp://x.org/"));
  CHECK_FALSE(parse_http_url("https:///path"));
  CHECK_FALSE(parse_http_url("https://exa mple.org/"));
  CHECK_FALSE(parse_http_url("https://x.org:99999/"));
  CHECK_FALSE(parse_http_url("/relative"));
  CHECK(normalize_url_key("https://www.example.org/a/") == normalize_url_key("http://example.org/a#x"));
  CHECK(normalize_url_key("https://example.org/a?b=1") != normalize_url_key("https://example.org/a?b=2"));
}

TEST_CASE("redirect resolution") {
  const auto base = *parse_http_url("https://a.example/dir/page?x=1");
  CHECK(resolve_url(base, "/root")->str() == "https://a.example/root");
  CHECK(resolve_url(base, "other")->str() == "https://a.example/dir/other");
  CHECK(resolve_url(base, "../up")->str() == "https://a.example/up");
  CHECK(resolve_url(base, "//b.example/z")->str() == "https://b.example/z");
  CHECK(resolve_url(base, "http://c.example/")->str() == "http://c.example/");
}

TEST_CASE("url scanner") {
  const auto urls = scan_urls(
      "See https://en.wikipedia.org/wiki/Cheyenne,_Wyoming. Also (https://example.org/a_(b)) and "
      "https://example.org/a_(b), plus www.nohttp.org and http://localhost:8080/x; xhttps://glued.org");
  REQUIRE(urls.size() == 3);
  CHECK(urls[0] == "https://en.wikipedia.org/wiki/Cheyenne,_Wyoming");
  CHECK(urls[1] == "https://example.org/a_(b)");
  CHECK(urls[2] == "http://localhost:8080/x");
}

TEST_CASE("url scanner never throws on noise") {
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) {
    std::string s = orbit::testing::random_bytes(rng, 60);
    if (rng.index(2)) s.insert(rng.index(s.size() + 1), "https://");
    for (const auto& u : scan_urls(s)) CHECK(is_absolute_http_url(u));
  }
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng is reproducible and shuffle is a permutation") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  Rng r(7);
  r.shuffle(v);
  CHECK(std::set<int>(v.begin(), v.end()).size() == 50);
  for (int i = 0; i < 1000; ++i) CHECK(r.index(3) < 3);
}

TEST_CASE("utc formatting") {
  const auto t = parse_utc("2025-03-04T05:06:07Z");
  CHECK(format_utc(t) == "2025-03-04T05:06:07Z");
  CHECK_THROWS_AS(parse_utc("2025-13-01T00:00:00Z"), Error);
}

TEST_CASE("rate limiter spaces grants per host") {
  ManualClock clock;
  HostRateLimiter limiter(clock, 2000ms);
  for (int i = 0; i < 3; ++i) limiter.acquire("a.example");
  limiter.acquire("b.example");
  const auto g = limiter.grants();
  CHECK(g[1].second - g[0].second >= 2000ms);
  CHECK(g[2].second - g[1].second >= 2000ms);
}

TEST_CASE("rate limiter under concurrency on the wall clock") {
  SystemClock clock;
  HostRateLimiter limiter(clock, 50ms);
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i) ts.emplace_back([&] { limiter.acquire("h"); });
  for (auto& t : ts) t.join();
  auto g = limiter.grants();
  std::sort(g.begin(), g.end(), [](auto& x, auto& y) { return x.second < y.second; });
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i].second - g[i - 1].second >= 50ms);
}

TEST_CASE("parallel_for matches the serial loop and rethrows") {
  std::vector<int> out(1000, 0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t i) {
                    if (i == 3) fail(ErrorCode::IoError, "boom");
                  }),
                  Error);
}

TEST_CASE("io helpers") {
  orbit::testing::TempDir dir;
  const auto p = dir / "sub/x.jsonl";
  CHECK(io::read_lines(p, true).empty());
  CHECK_THROWS_AS(io::read_lines(p), Error);
  io::append_lines(p, {"a", "b"});
  io::append_lines(p, {"c"});
  CHECK(io::read_lines(p) == std::vector<std::string>{"a", "b", "c"});
  io::write_file(p, "z\n");
  CHECK(io::read_file(p) == "z\n");
}

TEST_CASE("fixture transport") {
  FixtureTransport t;
  t.route("https://a.example/", FixtureTransport::html("<p>x</p>"));
  HttpRequest req;
  req.url = "https://a.example/";
  CHECK(t.send(req).status == 200);
  req.url = "https://a.example/missing";
  CHECK(t.send(req).status == 404);
  CHECK(t.calls().size() == 2);
}

TEST_CASE("csv rows survive escape and parse") {
  using orbit::text::csv_escape;
  using orbit::text::parse_csv;
  CHECK(parse_csv("a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\n\n") ==
        std::vector<std::vector<std::string>>{{"a", "b"}, {"x,y", "say \"hi\""}});
  CHECK(parse_csv("a,\n").at(0) == std::vector<std::string>{"a", ""});
  CHECK_THROWS_AS(parse_csv("\"open"), orbit::Error);
  orbit::Rng rng(3);
  const std::vector<std::string> alphabet{"a", ",", "\"", "\n", "\r\n", " ", "\xC3\xA9"};
  for (int t = 0; t < 500; ++t) {
    std::vector<std::vector<std::string>> rows(1 + rng.index(4));
    std::string csv;
    for (auto& row : rows) {
      row.resize(1 + rng.index(4));
      for (std::size_t c = 0; c < row.size(); ++c) {
        for (std::size_t k = rng.index(6); k > 0; --k) row[c] += alphabet[rng.index(alphabet.size())];
        if (c) csv += ",";
        csv += csv_escape(row[c]);
      }
      // a row of one empty field renders as a blank line, which is skipped
      if (row.size() == 1 && row[0].empty()) row[0] = "a", csv += "a";
      csv += "\n";
    }
    CHECK(parse_csv(csv) == rows);
  }
}
