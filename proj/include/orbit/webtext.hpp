#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "orbit/clock.hpp"
#include "orbit/http.hpp"
#include "orbit/model.hpp"
#include "orbit/rate_limiter.hpp"
#include "orbit/robots.hpp"
#include "orbit/url.hpp"

namespace orbit {

struct FetchPolicy {
  long timeout_ms = 15000;
  int max_retries = 2;
  std::chrono::milliseconds per_host_interval{2000};
  std::size_t max_bytes = 5 * 1024 * 1024;
  bool respect_robots = true;
  int max_redirects = 5;
  std::string user_agent = "orbit-fetch/1.0 (https://github.com/orbit-data/orbit; evidence fetcher)";
};

struct RawPage {
  std::string url;
  std::string final_url;
  int http_status = 0;
  std::string content_type;  // lowercase media type without parameters
  std::string charset;       // from the header, lowercase; may be empty
  std::string body;          // bytes as received
  std::string fetched_at;

  bool operator==(const RawPage&) const = default;
};

struct WebDocument {
  std::string url;
  std::string final_url;
  int http_status = 0;
  std::optional<std::string> title;
  std::string text;
  std::string fetched_at;
  bool truncated = false;

  bool operator==(const WebDocument&) const = default;
};

/// Polite single-URL fetcher: robots.txt (cached per origin), per-host
/// pacing, manual redirect following, retries on timeouts and 5xx.
class Fetcher {
 public:
  Fetcher(HttpTransport& transport, HostRateLimiter& limiter, const Clock& clock, FetchPolicy policy = {});

  /// Throws Error(InvalidUrl | Timeout | TooLarge | RobotsDisallowed |
  /// HttpError | DnsFailure | TooManyRedirects).
  RawPage fetch(const std::string& url);
  const FetchPolicy& policy() const { return policy_; }

 private:
  bool robots_allow(const Url& u);
  HttpResponse send_paced(const std::string& url, const std::string& host);

  HttpTransport& transport_;
  HostRateLimiter& limiter_;
  const Clock& clock_;
  FetchPolicy policy_;
  std::mutex robots_mu_;
  std::map<std::string, std::shared_ptr<RobotsRules>> robots_;
};

/// Decodes the body to UTF-8 using the header charset, then a <meta>
/// declaration, then lossy UTF-8.
std::string decode_body(const RawPage& raw);

/// Main-body text: script/style/nav/footer/aside subtrees dropped,
/// paragraph/heading/list/table/pre/blockquote blocks kept in order, each
/// whitespace-collapsed, joined by blank lines. Title is the first h1, else
/// <title>. Throws Error(NotHtml) for binary content types.
WebDocument extract_main_text(const RawPage& raw);

struct EvidenceBlock {
  int index = 0;
  std::string url;
  std::string text;
  bool truncated = false;
};

struct EvidenceBundle {
  std::vector<EvidenceBlock> blocks;
  std::vector<int> missing;  // evidence indices without a live document
  std::size_t per_doc_budget = 0;

  /// "URL: <url>\nContent: <text>" blocks joined by blank lines.
  std::string render() const;
};

inline constexpr std::size_t kDefaultBundleBudget = 32000;
inline constexpr std::string_view kTruncationMarker = " [...]";

/// Blocks in evidence-index order; each live document gets
/// floor(total_budget / live) code points including the truncation marker.
/// `docs` is keyed by evidence URL. Throws Error(NoLiveEvidence).
EvidenceBundle build_evidence_bundle(const TrainingExample& record, const std::map<std::string, WebDocument>& docs,
                                     std::size_t total_budget = kDefaultBundleBudget);

/// Outcome of fetching one URL: a document or the error that stopped it.
struct FetchResult {
  std::optional<RawPage> raw;
  std::optional<WebDocument> doc;
  std::string error;  // "Code(detail)" when failed
};

/// Content-addressed page cache: <root>/web/<2 hex>/<sha256(url)>.json.
class WebCache {
 public:
  explicit WebCache(std::filesystem::path root) : root_(std::move(root)) {}
  std::optional<FetchResult> get(const std::string& url) const;
  void put(const std::string& url, const FetchResult& r) const;
  std::filesystem::path path_for(const std::string& url) const;

 private:
  std::filesystem::path root_;
};

struct FetchRunOptions {
  bool replay = false;  // cache only; misses become errors
  int workers = 4;
};

/// Fetches and extracts every distinct URL once, consulting the cache first.
std::map<std::string, FetchResult> fetch_documents(const std::vector<std::string>& urls, Fetcher* fetcher,
                                                   const WebCache& cache, const FetchRunOptions& opts);

/// Live documents keyed by URL, for build_evidence_bundle.
std::map<std::string, WebDocument> live_documents(const std::map<std::string, FetchResult>& results);

}  // namespace orbit
