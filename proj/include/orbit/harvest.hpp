#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbit/clock.hpp"
#include "orbit/http.hpp"
#include "orbit/model.hpp"
#include "orbit/rate_limiter.hpp"

namespace orbit {

struct CategorySpec {
  Domain domain = Domain::TvShowsMovies;
  std::string category;  // always carries the "Category:" prefix
  std::optional<int> max_pages;

  bool operator==(const CategorySpec&) const = default;
};

/// Tab-separated "domain<TAB>category[<TAB>max_pages]" lines (blank lines and
/// '#' comments skipped) or JSON: an array of {domain, category, max_pages?}
/// or {"categories": [...]}. Duplicate (domain, category) rows collapse to the
/// first. Throws Error(MissingFile) or Error(MalformedCatalog, "line N").
std::vector<CategorySpec> load_catalog(const std::filesystem::path& path);
std::vector<CategorySpec> parse_catalog(const std::string& content);

struct WikiClientOptions {
  std::string endpoint = "https://en.wikipedia.org/w/api.php";
  std::string user_agent = "orbit-harvest/1.0 (https://github.com/orbit-data/orbit; data-synthesis)";
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(2), std::chrono::seconds(4),
                                                 std::chrono::seconds(8)};
  long timeout_ms = 15000;
  int page_size = 500;
};

struct CategoryMember {
  std::int64_t page_id = 0;
  int ns = 0;
  std::string title;
};

/// MediaWiki action API client: GET only, per-host pacing through the shared
/// limiter, exponential backoff on 429/5xx.
class WikiApiClient {
 public:
  WikiApiClient(HttpTransport& transport, HostRateLimiter& limiter, Clock& clock, WikiClientOptions opts = {});

  /// Category members in namespace `ns` (0 = articles, 14 = subcategories),
  /// following continuation tokens until exhausted or `limit` reached.
  std::vector<CategoryMember> category_members(const std::string& category, int ns,
                                               std::optional<int> limit = std::nullopt);
  bool category_exists(const std::string& category);

  /// URL for a query; exposed so fixtures can be keyed identically.
  std::string query_url(const std::vector<std::pair<std::string, std::string>>& params) const;
  const WikiClientOptions& options() const { return opts_; }

 private:
  nlohmann::json get(const std::vector<std::pair<std::string, std::string>>& params);

  HttpTransport& transport_;
  HostRateLimiter& limiter_;
  Clock& clock_;
  WikiClientOptions opts_;
  std::string host_;
};

/// Direct article members of the category as seeds, capped at spec.max_pages.
/// `recursion_depth` > 0 also descends into subcategories (at most 2 levels).
/// Throws Error(CategoryNotFound), Error(ApiError) or Error(RateLimited).
std::vector<Seed> expand_category(const CategorySpec& spec, WikiApiClient& client, int recursion_depth = 0,
                                  std::optional<int> limit = std::nullopt);

struct SourceLogEntry {
  Domain domain = Domain::TvShowsMovies;
  std::string category;
  int page_count = 0;  // -1 when the category failed
  std::string fetched_at;
  std::string error;

  bool operator==(const SourceLogEntry&) const = default;
};

struct SeedBatch {
  std::vector<Seed> seeds;
  std::vector<SourceLogEntry> source_log;
};

struct HarvestLimits {
  std::optional<std::size_t> global_budget;
  int recursion_depth = 0;
  int workers = 1;
};

/// Expands every category (concurrently up to `workers`), then interleaves
/// them round-robin in catalog order, dropping repeated (domain, page_title)
/// and stopping at the global budget. Failed categories stay in the log with
/// page_count -1.
SeedBatch harvest(const std::vector<CategorySpec>& catalog, WikiApiClient& client, const HarvestLimits& limits,
                  const Clock& clock);

/// Round-robin merge used by harvest; exposed for tests.
std::vector<Seed> interleave_seeds(const std::vector<std::vector<Seed>>& per_category,
                                   std::optional<std::size_t> budget);

std::string render_source_entry(const SourceLogEntry& e);
SourceLogEntry parse_source_entry(std::string_view line);

}  // namespace orbit
