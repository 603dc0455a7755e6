#include "orbit/harvest.hpp"

#include <set>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/parallel.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

using nlohmann::json;

namespace {

constexpr std::string_view kCategoryPrefix = "Category:";
constexpr int kMaxRecursion = 2;

std::string with_prefix(const std::string& category) {
  const std::string c = text::trim(category);
  if (text::istarts_with(c, kCategoryPrefix)) return std::string(kCategoryPrefix) + c.substr(kCategoryPrefix.size());
  return std::string(kCategoryPrefix) + c;
}

CategorySpec spec_from_fields(const std::string& domain, const std::string& category, std::optional<int> max_pages,
                              const std::string& where) {
  const auto d = parse_domain(text::trim(domain));
  if (!d) fail(ErrorCode::MalformedCatalog, where + ": unknown domain '" + domain + "'");
  if (text::trim(category).empty()) fail(ErrorCode::MalformedCatalog, where + ": empty category");
  if (max_pages && *max_pages < 0) fail(ErrorCode::MalformedCatalog, where + ": negative max_pages");
  return CategorySpec{*d, with_prefix(category), max_pages};
}

}  // namespace

std::vector<CategorySpec> parse_catalog(const std::string& content) {
  std::vector<CategorySpec> specs;
  const std::string trimmed = text::trim(content);
  if (!trimmed.empty() && (trimmed.front() == '[' || trimmed.front() == '{')) {
    json j;
    try {
      j = json::parse(trimmed);
    } catch (const json::exception& e) {
      fail(ErrorCode::MalformedCatalog, std::string("json: ") + e.what());
    }
    if (j.is_object()) j = j.value("categories", json::array());
    if (!j.is_array()) fail(ErrorCode::MalformedCatalog, "json: expected an array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string where = "entry " + std::to_string(i + 1);
      const json& row = j[i];
      if (!row.is_object() || !row.contains("domain") || !row["domain"].is_string() || !row.contains("category") ||
          !row["category"].is_string())
        fail(ErrorCode::MalformedCatalog, where);
      std::optional<int> max_pages;
      if (row.contains("max_pages") && !row["max_pages"].is_null()) {
        if (!row["max_pages"].is_number_integer()) fail(ErrorCode::MalformedCatalog, where + ": max_pages");
        max_pages = row["max_pages"].get<int>();
      }
      specs.push_back(spec_from_fields(row["domain"], row["category"], max_pages, where));
    }
  } else {
    const auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string line = text::trim(lines[i]);
      if (line.empty() || line.front() == '#') continue;
      const std::string where = "line " + std::to_string(i + 1);
      const auto cols = text::split(lines[i], '\t');
      if (cols.size() < 2 || cols.size() > 3) fail(ErrorCode::MalformedCatalog, where);
      std::optional<int> max_pages;
      if (cols.size() == 3 && !text::trim(cols[2]).empty()) {
        try {
          std::size_t used = 0;
          const std::string v = text::trim(cols[2]);
          max_pages = std::stoi(v, &used);
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          fail(ErrorCode::MalformedCatalog, where + ": max_pages");
        }
      }
      specs.push_back(spec_from_fields(cols[0], cols[1], max_pages, where));
    }
  }
  std::vector<CategorySpec> out;
  std::set<std::pair<Domain, std::string>> seen;
  for (auto& s : specs) {
    if (seen.insert({s.domain, s.category}).second) out.push_back(std::move(s));
  }
  return out;
}

std::vector<CategorySpec> load_catalog(const std::filesystem::path& path) {
  return parse_catalog(io::read_file(path));
}

WikiApiClient::WikiApiClient(HttpTransport& transport, HostRateLimiter& limiter, Clock& clock, WikiClientOptions opts)
    : transport_(transport), limiter_(limiter), clock_(clock), opts_(std::move(opts)) {
  const auto u = parse_http_url(opts_.endpoint);
  if (!u) fail(ErrorCode::ConfigError, "wiki endpoint: " + opts_.endpoint);
  host_ = u->host;
}

std::string WikiApiClient::query_url(const std::vector<std::pair<std::string, std::string>>& params) const {
  std::string url = opts_.endpoint;
  char sep = url.find('?') == std::string::npos ? '?' : '&';
  for (const auto& [k, v] : params) {
    url += sep;
    url += url_encode(k) + "=" + url_encode(v);
    sep = '&';
  }
  return url;
}

json WikiApiClient::get(const std::vector<std::pair<std::string, std::string>>& params) {
  HttpRequest req;
  req.url = query_url(params);
  req.timeout_ms = opts_.timeout_ms;
  req.headers.emplace_back("User-Agent", opts_.user_agent);
  req.headers.emplace_back("Accept", "application/json");
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire(host_);
    int status = 0;
    std::string retry_after;
    try {
      const HttpResponse resp = transport_.send(req);
      status = resp.status;
      if (status >= 200 && status < 300) {
        try {
          json j = json::parse(resp.body);
          if (j.contains("error")) {
            const std::string code = j["error"].value("code", "");
            if (code == "ratelimited" || code == "maxlag") {
              status = 429;
            } else {
              fail(ErrorCode::ApiError, code.empty() ? "api error" : code);
            }
          } else {
            return j;
          }
        } catch (const json::exception&) {
          fail(ErrorCode::ApiError, "malformed JSON");
        }
      }
      retry_after = resp.header("retry-after");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ApiError) throw;
      status = 0;  // transport failure: retried like a 5xx
      retry_after.clear();
      if (attempt >= opts_.max_retries) fail(ErrorCode::ApiError, e.what());
    }
    const bool retryable = status == 0 || status == 429 || status >= 500;
    if (!retryable) fail(ErrorCode::ApiError, std::to_string(status));
    if (attempt >= opts_.max_retries) {
      if (status == 429) fail(ErrorCode::RateLimited, retry_after.empty() ? "unknown" : retry_after);
      fail(ErrorCode::ApiError, std::to_string(status));
    }
    auto wait = opts_.backoff.empty() ? std::chrono::milliseconds(0)
                                      : opts_.backoff[std::min<std::size_t>(attempt, opts_.backoff.size() - 1)];
    if (!retry_after.empty() && std::all_of(retry_after.begin(), retry_after.end(), ::isdigit)) {
      wait = std::max(wait, std::chrono::milliseconds(std::stoll(retry_after) * 1000));
    }
    log::warn("harvest", req.url, "retrying", {{"status", status}, {"wait_ms", wait.count()}});
    clock_.sleep_for(wait);
  }
}

std::vector<CategoryMember> WikiApiClient::category_members(const std::string& category, int ns,
                                                            std::optional<int> limit) {
  std::vector<CategoryMember> out;
  std::string cont;
  do {
    std::vector<std::pair<std::string, std::string>> params = {
        {"action", "query"},        {"format", "json"},
        {"list", "categorymembers"}, {"cmtitle", with_prefix(category)},
        {"cmnamespace", std::to_string(ns)}, {"cmlimit", std::to_string(opts_.page_size)},
    };
    if (!cont.empty()) params.emplace_back("cmcontinue", cont);
    const json j = get(params);
    const json members = j.contains("query") ? j["query"].value("categorymembers", json::array()) : json::array();
    for (const auto& m : members) {
      if (!m.contains("title") || !m["title"].is_string()) fail(ErrorCode::ApiError, "member without title");
      out.push_back(CategoryMember{m.value("pageid", std::int64_t{0}), m.value("ns", ns), m["title"]});
      if (limit && static_cast<int>(out.size()) >= *limit) return out;
    }
    cont.clear();
    if (j.contains("continue") && j["continue"].contains("cmcontinue"))
      cont = j["continue"]["cmcontinue"].get<std::string>();
  } while (!cont.empty());
  return out;
}

bool WikiApiClient::category_exists(const std::string& category) {
  const json j = get({{"action", "query"}, {"format", "json"}, {"titles", with_prefix(category)}});
  if (!j.contains("query") || !j["query"].contains("pages")) return false;
  for (const auto& [_, page] : j["query"]["pages"].items()) {
    if (page.contains("missing") || page.contains("invalid")) return false;
  }
  return true;
}

namespace {

void expand_into(const CategorySpec& spec, const std::string& category, WikiApiClient& client, int depth,
                 std::optional<int> limit, std::vector<Seed>& out, std::set<std::string>& visited,
                 std::set<std::string>& titles) {
  if (!visited.insert(category).second) return;
  const auto remaining = [&]() -> std::optional<int> {
    if (!limit) return std::nullopt;
    return *limit - static_cast<int>(out.size());
  };
  if (limit && remaining() <= 0) return;
  const auto members = client.category_members(category, 0, remaining());
  if (members.empty() && visited.size() == 1 && !client.category_exists(category))
    fail(ErrorCode::CategoryNotFound, category);
  for (const auto& m : members) {
    if (!titles.insert(m.title).second) continue;
    Seed s{spec.domain, spec.category, m.title, std::nullopt};
    if (m.page_id > 0) s.page_id = m.page_id;
    out.push_back(std::move(s));
  }
  if (depth <= 0) return;
  for (const auto& sub : client.category_members(category, 14)) {
    if (limit && remaining() <= 0) return;
    expand_into(spec, sub.title, client, depth - 1, limit, out, visited, titles);
  }
}

}  // namespace

std::vector<Seed> expand_category(const CategorySpec& spec, WikiApiClient& client, int recursion_depth,
                                  std::optional<int> limit) {
  if (recursion_depth < 0 || recursion_depth > kMaxRecursion)
    fail(ErrorCode::InvalidArgument, "recursion depth must be within 0..2");
  std::optional<int> cap = spec.max_pages;
  if (limit) cap = cap ? std::min(*cap, *limit) : *limit;
  std::vector<Seed> out;
  if (cap && *cap == 0) return out;
  std::set<std::string> visited, titles;
  expand_into(spec, spec.category, client, recursion_depth, cap, out, visited, titles);
  return out;
}

std::vector<Seed> interleave_seeds(const std::vector<std::vector<Seed>>& per_category,
                                   std::optional<std::size_t> budget) {
  std::vector<Seed> out;
  std::set<std::pair<Domain, std::string>> seen;
  std::vector<std::size_t> cursor(per_category.size(), 0);
  // Each pass gives every category one *new* seed (skipping its duplicates),
  // so live categories stay within one of each other under a budget.
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (std::size_t c = 0; c < per_category.size(); ++c) {
      const auto& list = per_category[c];
      while (cursor[c] < list.size()) {
        const Seed& s = list[cursor[c]++];
        if (!seen.insert({s.domain, s.page_title}).second) continue;
        if (budget && out.size() >= *budget) return out;
        out.push_back(s);
        progressed = true;
        break;
      }
    }
  }
  return out;
}

SeedBatch harvest(const std::vector<CategorySpec>& catalog, WikiApiClient& client, const HarvestLimits& limits,
                  const Clock& clock) {
  std::vector<std::vector<Seed>> expanded(catalog.size());
  std::vector<SourceLogEntry> log_entries(catalog.size());
  std::optional<int> per_category_cap;
  if (limits.global_budget) per_category_cap = static_cast<int>(*limits.global_budget);
  parallel_for(catalog.size(), limits.workers, [&](std::size_t i) {
    const CategorySpec& spec = catalog[i];
    SourceLogEntry& entry = log_entries[i];
    entry.domain = spec.domain;
    entry.category = spec.category;
    try {
      expanded[i] = expand_category(spec, client, limits.recursion_depth, per_category_cap);
      entry.page_count = static_cast<int>(expanded[i].size());
    } catch (const Error& e) {
      entry.page_count = -1;
      entry.error = e.what();
      log::warn("harvest", spec.category, "category failed", {{"error", e.what()}});
    }
    entry.fetched_at = format_utc(clock.now());
  });
  SeedBatch batch;
  batch.seeds = interleave_seeds(expanded, limits.global_budget);
  batch.source_log = std::move(log_entries);
  return batch;
}

std::string render_source_entry(const SourceLogEntry& e) {
  nlohmann::ordered_json j;
  j["version"] = kRecordVersion;
  j["domain"] = to_string(e.domain);
  j["category"] = e.category;
  j["page_count"] = e.page_count;
  j["fetched_at"] = e.fetched_at;
  if (!e.error.empty()) j["error"] = e.error;
  return j.dump();
}

SourceLogEntry parse_source_entry(std::string_view line) {
  const json j = parse_json_line(line);
  SourceLogEntry e;
  try {
    const auto d = parse_domain(j.at("domain").get<std::string>());
    if (!d) fail(ErrorCode::SchemaViolation, "domain");
    e.domain = *d;
    e.category = j.at("category").get<std::string>();
    e.page_count = j.at("page_count").get<int>();
    e.fetched_at = j.at("fetched_at").get<std::string>();
    e.error = j.value("error", "");
  } catch (const json::exception& ex) {
    fail(ErrorCode::SchemaViolation, ex.what());
  }
  return e;
}

}  // namespace orbit
