#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "orbit/clock.hpp"
#include "orbit/http.hpp"

namespace orbit {

struct SearchResult {
  std::string title;
  std::string snippet;
  std::string url;
  std::string backend;
  int rank = 0;  // 1-based

  bool operator==(const SearchResult&) const = default;
};

inline constexpr std::size_t kSnippetMaxChars = 400;

/// Lowercase, trimmed, inner whitespace collapsed.
std::string normalize_query(std::string_view query);

struct SearchBackendSpec {
  std::string name;
  std::string kind;  // "html-scrape" | "json-api" | "wiki-api" | "fixture"
  std::string endpoint;  // URL, or a file path for fixtures
  int priority = 0;      // lower runs first in the merge
};

class SearchBackend {
 public:
  explicit SearchBackend(SearchBackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~SearchBackend() = default;
  /// Up to k results ranked from 1. Failures throw orbit::Error.
  virtual std::vector<SearchResult> search(const std::string& query, int k, std::chrono::milliseconds timeout) = 0;
  const SearchBackendSpec& spec() const { return spec_; }

 protected:
  SearchBackendSpec spec_;
};

/// Canned results keyed by normalized query:
/// {"queries": {"<query>": [{"title","snippet","url"}]}, "error": "timeout"|"http",
///  "delay_ms": n}. Unknown queries return no results.
class FixtureBackend final : public SearchBackend {
 public:
  FixtureBackend(SearchBackendSpec spec, const nlohmann::json& fixture);
  static std::shared_ptr<FixtureBackend> load(SearchBackendSpec spec);
  std::vector<SearchResult> search(const std::string& query, int k, std::chrono::milliseconds timeout) override;

 private:
  std::map<std::string, std::vector<SearchResult>> queries_;
  std::string error_;
  std::chrono::milliseconds delay_{0};
};

/// POST {query, topk} -> {results:[{title,snippet,url}]}; the wire shape of
/// the search facade.
class JsonApiBackend final : public SearchBackend {
 public:
  JsonApiBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport);
  std::vector<SearchResult> search(const std::string& query, int k, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
};

/// MediaWiki full-text search (list=search); snippets lose their markup.
class WikiApiBackend final : public SearchBackend {
 public:
  WikiApiBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport);
  std::vector<SearchResult> search(const std::string& query, int k, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
};

/// DuckDuckGo's HTML endpoint (result__a / result__snippet anchors).
class HtmlScrapeBackend final : public SearchBackend {
 public:
  HtmlScrapeBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport);
  std::vector<SearchResult> search(const std::string& query, int k, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
};

/// Result extraction for the HTML endpoint, exposed for fixture tests.
std::vector<SearchResult> parse_ddg_html(std::string_view html, const std::string& backend, int k);

std::shared_ptr<SearchBackend> make_backend(const SearchBackendSpec& spec, std::shared_ptr<HttpTransport> transport);

enum class CacheMode { Off, Record, Replay };
CacheMode parse_cache_mode(std::string_view s);

/// JSONL store of {query_norm, k, results, ts}. Concurrent readers, one
/// writer at a time; later lines win on load.
class SearchCache {
 public:
  explicit SearchCache(std::filesystem::path file);
  std::optional<std::vector<SearchResult>> lookup(const std::string& query, int k) const;
  void record(const std::string& query, int k, const std::vector<SearchResult>& results, const std::string& ts);
  std::size_t size() const;

 private:
  std::filesystem::path file_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, int>, std::vector<SearchResult>> entries_;
};

struct MetaSearchOptions {
  std::chrono::milliseconds backend_timeout{8000};
  std::chrono::milliseconds overall_timeout{12000};
  CacheMode cache_mode = CacheMode::Off;
};

struct SearchResponse {
  std::vector<SearchResult> results;
  std::vector<std::string> served_by;           // backends present in `results`, merge order
  std::map<std::string, std::string> failures;  // backend -> error
  bool downgraded = false;  // the top-priority backend contributed nothing
  bool from_cache = false;
};

/// Anything that answers a (query, k) search; implementations are thread-safe.
class Searcher {
 public:
  virtual ~Searcher() = default;
  virtual SearchResponse search(const std::string& query, int k) = 0;
};

/// Fans a query out to every backend, then merges by priority, dedups by
/// normalized URL and truncates to k. Thread-safe.
class MetaSearch final : public Searcher {
 public:
  MetaSearch(std::vector<std::shared_ptr<SearchBackend>> backends, const Clock& clock, MetaSearchOptions opts = {},
             std::shared_ptr<SearchCache> cache = nullptr);

  /// Throws Error(EmptyQuery | InvalidArgument | AllBackendsFailed | ReplayMiss).
  SearchResponse search(const std::string& query, int k) override;
  const std::vector<std::shared_ptr<SearchBackend>>& backends() const { return backends_; }

 private:
  std::vector<std::shared_ptr<SearchBackend>> backends_;  // merge order
  const Clock& clock_;
  MetaSearchOptions opts_;
  std::shared_ptr<SearchCache> cache_;
};

/// Priority merge used by MetaSearch: lists in backend order, first URL
/// occurrence wins, ranks renumbered from 1.
std::vector<SearchResult> merge_results(const std::vector<std::vector<SearchResult>>& per_backend, int k);

/// Builds backends from {"backends":[{name, kind, endpoint, priority}],
/// "backend_timeout_ms", "overall_timeout_ms"}; fixture paths resolve
/// against `base_dir`.
std::vector<std::shared_ptr<SearchBackend>> backends_from_config(const nlohmann::json& config,
                                                                 const std::filesystem::path& base_dir,
                                                                 std::shared_ptr<HttpTransport> transport);

/// Backends used when no config is given: DuckDuckGo HTML, then Wikipedia.
std::vector<SearchBackendSpec> default_backend_specs();

/// POST /search handler body: {query, topk} -> {results:[{title,snippet,url}]}.
/// Returns the HTTP status and JSON body.
std::pair<int, std::string> handle_search_request(MetaSearch& search, std::string_view body);

/// HTTP facade exposing POST /search.
class SearchServer {
 public:
  explicit SearchServer(MetaSearch& search);
  ~SearchServer();
  SearchServer(const SearchServer&) = delete;
  SearchServer& operator=(const SearchServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one. Throws
  /// Error(IoError) when binding fails.
  int bind(const std::string& host, int port = 0);
  /// Blocks serving requests until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace orbit
