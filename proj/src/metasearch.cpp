#include "orbit/metasearch.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "httplib.h"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/model.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

using nlohmann::json;

std::string normalize_query(std::string_view query) { return text::to_lower(text::collapse_whitespace(query)); }

namespace {

std::vector<SearchResult> results_from_json(const json& arr, const std::string& backend, int k) {
  std::vector<SearchResult> out;
  if (!arr.is_array()) fail(ErrorCode::MalformedJson, backend + ": results is not an array");
  for (const auto& r : arr) {
    if (static_cast<int>(out.size()) >= k) break;
    if (!r.is_object() || !r.contains("url") || !r["url"].is_string()) continue;
    SearchResult s;
    s.url = r["url"].get<std::string>();
    if (r.contains("title") && r["title"].is_string()) s.title = r["title"].get<std::string>();
    if (r.contains("snippet") && r["snippet"].is_string()) s.snippet = r["snippet"].get<std::string>();
    s.backend = backend;
    s.rank = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(s));
  }
  return out;
}

json result_to_json(const SearchResult& r, bool full) {
  json j = {{"title", r.title}, {"snippet", r.snippet}, {"url", r.url}};
  if (full) {
    j["backend"] = r.backend;
    j["rank"] = r.rank;
  }
  return j;
}

std::string strip_tags(std::string_view html) {
  std::string out;
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') in_tag = true;
    else if (c == '>' && in_tag) in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  return text::collapse_whitespace(text::decode_entities(out));
}

std::string wiki_title_path(const std::string& title) {
  static const std::string safe = "-_.~!*'(),:;@/$";
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : title) {
    if (c == ' ') out.push_back('_');
    else if (std::isalnum(c) || safe.find(static_cast<char>(c)) != std::string::npos) out.push_back(static_cast<char>(c));
    else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

HttpResponse checked_send(HttpTransport& transport, const HttpRequest& req, const std::string& backend) {
  HttpResponse resp = transport.send(req);
  if (resp.status == 408 || resp.status == 504) fail(ErrorCode::Timeout, backend);
  if (resp.status < 200 || resp.status >= 300) fail(ErrorCode::HttpError, backend + " " + std::to_string(resp.status));
  return resp;
}

json parse_body(const std::string& body, const std::string& backend) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    fail(ErrorCode::MalformedJson, backend);
  }
}

}  // namespace

FixtureBackend::FixtureBackend(SearchBackendSpec spec, const json& fixture) : SearchBackend(std::move(spec)) {
  if (fixture.contains("queries")) {
    for (const auto& [q, arr] : fixture["queries"].items())
      queries_[normalize_query(q)] = results_from_json(arr, spec_.name, 1 << 20);
  }
  if (fixture.contains("error")) error_ = fixture["error"].get<std::string>();
  if (fixture.contains("delay_ms")) delay_ = std::chrono::milliseconds(fixture["delay_ms"].get<long>());
}

std::shared_ptr<FixtureBackend> FixtureBackend::load(SearchBackendSpec spec) {
  const json j = parse_body(io::read_file(spec.endpoint), spec.name);
  return std::make_shared<FixtureBackend>(std::move(spec), j);
}

std::vector<SearchResult> FixtureBackend::search(const std::string& query, int k, std::chrono::milliseconds timeout) {
  if (delay_.count() > 0) {
    std::this_thread::sleep_for(std::min(delay_, timeout));
    if (delay_ > timeout) fail(ErrorCode::Timeout, spec_.name);
  }
  if (error_ == "timeout") fail(ErrorCode::Timeout, spec_.name);
  if (!error_.empty()) fail(ErrorCode::HttpError, spec_.name + " " + error_);
  auto it = queries_.find(normalize_query(query));
  if (it == queries_.end()) return {};
  std::vector<SearchResult> out(it->second.begin(), it->second.begin() + std::min<std::size_t>(k, it->second.size()));
  return out;
}

JsonApiBackend::JsonApiBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport)
    : SearchBackend(std::move(spec)), transport_(std::move(transport)) {}

std::vector<SearchResult> JsonApiBackend::search(const std::string& query, int k, std::chrono::milliseconds timeout) {
  HttpRequest req;
  req.method = "POST";
  req.url = spec_.endpoint;
  req.headers = {{"Content-Type", "application/json"}};
  req.body = json{{"query", query}, {"topk", k}}.dump();
  req.timeout_ms = static_cast<long>(timeout.count());
  const json j = parse_body(checked_send(*transport_, req, spec_.name).body, spec_.name);
  if (!j.is_object() || !j.contains("results")) fail(ErrorCode::MalformedJson, spec_.name + ": no results");
  return results_from_json(j["results"], spec_.name, k);
}

WikiApiBackend::WikiApiBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport)
    : SearchBackend(std::move(spec)), transport_(std::move(transport)) {}

std::vector<SearchResult> WikiApiBackend::search(const std::string& query, int k, std::chrono::milliseconds timeout) {
  const auto base = parse_http_url(spec_.endpoint);
  if (!base) fail(ErrorCode::ConfigError, spec_.name + ": bad endpoint");
  HttpRequest req;
  req.url = spec_.endpoint + "?action=query&format=json&list=search&srsearch=" + url_encode(query) +
            "&srlimit=" + std::to_string(k);
  req.timeout_ms = static_cast<long>(timeout.count());
  const json j = parse_body(checked_send(*transport_, req, spec_.name).body, spec_.name);
  std::vector<SearchResult> out;
  if (!j.contains("query") || !j["query"].contains("search")) return out;
  for (const auto& hit : j["query"]["search"]) {
    if (static_cast<int>(out.size()) >= k) break;
    if (!hit.contains("title") || !hit["title"].is_string()) continue;
    SearchResult r;
    r.title = hit["title"].get<std::string>();
    if (hit.contains("snippet") && hit["snippet"].is_string()) r.snippet = strip_tags(hit["snippet"].get<std::string>());
    r.url = base->origin() + "/wiki/" + wiki_title_path(r.title);
    r.backend = spec_.name;
    r.rank = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(r));
  }
  return out;
}

HtmlScrapeBackend::HtmlScrapeBackend(SearchBackendSpec spec, std::shared_ptr<HttpTransport> transport)
    : SearchBackend(std::move(spec)), transport_(std::move(transport)) {}

std::vector<SearchResult> HtmlScrapeBackend::search(const std::string& query, int k, std::chrono::milliseconds timeout) {
  HttpRequest req;
  req.url = spec_.endpoint + "?q=" + url_encode(query);
  req.headers = {{"User-Agent", "Mozilla/5.0 (compatible; orbit-search/1.0)"}};
  req.timeout_ms = static_cast<long>(timeout.count());
  return parse_ddg_html(checked_send(*transport_, req, spec_.name).body, spec_.name, k);
}

namespace {

// Attribute value inside one start tag, or empty.
std::string attr_value(std::string_view tag, std::string_view name) {
  const std::string lower = text::to_lower(tag);
  std::size_t pos = 0;
  while ((pos = lower.find(name, pos)) != std::string::npos) {
    const bool boundary = pos > 0 && std::isspace(static_cast<unsigned char>(lower[pos - 1]));
    std::size_t i = pos + name.size();
    while (i < lower.size() && lower[i] == ' ') ++i;
    if (boundary && i < lower.size() && lower[i] == '=') {
      ++i;
      while (i < lower.size() && lower[i] == ' ') ++i;
      if (i >= tag.size()) return {};
      const char q = tag[i];
      if (q == '"' || q == '\'') {
        const auto end = tag.find(q, i + 1);
        return std::string(tag.substr(i + 1, end == std::string_view::npos ? std::string_view::npos : end - i - 1));
      }
      std::size_t end = i;
      while (end < tag.size() && !std::isspace(static_cast<unsigned char>(tag[end])) && tag[end] != '>') ++end;
      return std::string(tag.substr(i, end - i));
    }
    pos += name.size();
  }
  return {};
}

struct Anchor {
  std::string cls, href, inner;
  std::size_t end = std::string_view::npos;
};

// Next element whose class attribute contains `cls`, starting at `from`.
std::optional<Anchor> next_with_class(std::string_view html, std::string_view cls, std::size_t from) {
  std::size_t pos = from;
  while ((pos = html.find(cls, pos)) != std::string_view::npos) {
    const auto open = html.rfind('<', pos);
    const auto close = html.find('>', pos);
    if (open == std::string_view::npos || close == std::string_view::npos) return std::nullopt;
    const std::string_view tag = html.substr(open, close - open + 1);
    const std::string klass = attr_value(tag, "class");
    if (klass.find(cls) == std::string::npos) {
      pos += cls.size();
      continue;
    }
    std::size_t name_end = open + 1;
    while (name_end < html.size() && std::isalnum(static_cast<unsigned char>(html[name_end]))) ++name_end;
    const std::string name = text::to_lower(html.substr(open + 1, name_end - open - 1));
    const std::string closer = "</" + name;
    std::size_t inner_end = close + 1;
    while (inner_end < html.size() && !text::istarts_with(html.substr(inner_end), closer)) ++inner_end;
    Anchor a{klass, attr_value(tag, "href"), std::string(html.substr(close + 1, inner_end - close - 1)), inner_end};
    return a;
  }
  return std::nullopt;
}

std::string ddg_target(std::string href) {
  href = text::decode_entities(href);
  if (const auto p = href.find("uddg="); p != std::string::npos) {
    const auto amp = href.find('&', p);
    href = url_decode(href.substr(p + 5, amp == std::string::npos ? std::string::npos : amp - p - 5));
  }
  if (href.rfind("//", 0) == 0) href = "https:" + href;
  return href;
}

}  // namespace

std::vector<SearchResult> parse_ddg_html(std::string_view html, const std::string& backend, int k) {
  std::vector<SearchResult> out;
  std::size_t pos = 0;
  while (static_cast<int>(out.size()) < k) {
    const auto a = next_with_class(html, "result__a", pos);
    if (!a) break;
    pos = a->end;
    const std::string url = ddg_target(a->href);
    SearchResult r;
    r.title = strip_tags(a->inner);
    r.url = url;
    const auto next = next_with_class(html, "result__a", pos);
    const auto snip = next_with_class(html, "result__snippet", pos);
    if (snip && (!next || snip->end < next->end)) r.snippet = strip_tags(snip->inner);
    if (!is_absolute_http_url(url) || url.find("duckduckgo.com/y.js") != std::string::npos) continue;
    r.backend = backend;
    r.rank = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(r));
  }
  return out;
}

std::shared_ptr<SearchBackend> make_backend(const SearchBackendSpec& spec, std::shared_ptr<HttpTransport> transport) {
  if (spec.kind == "fixture") return FixtureBackend::load(spec);
  if (!transport) fail(ErrorCode::ConfigError, spec.name + ": no transport");
  if (spec.kind == "json-api") return std::make_shared<JsonApiBackend>(spec, transport);
  if (spec.kind == "wiki-api") return std::make_shared<WikiApiBackend>(spec, transport);
  if (spec.kind == "html-scrape") return std::make_shared<HtmlScrapeBackend>(spec, transport);
  fail(ErrorCode::ConfigError, "unknown backend kind " + spec.kind);
}

CacheMode parse_cache_mode(std::string_view s) {
  if (s == "off") return CacheMode::Off;
  if (s == "record") return CacheMode::Record;
  if (s == "replay") return CacheMode::Replay;
  fail(ErrorCode::ConfigError, "cache mode " + std::string(s));
}

SearchCache::SearchCache(std::filesystem::path file) : file_(std::move(file)) {
  for (const auto& line : io::read_lines(file_, true)) {
    const json j = parse_json_line(line);
    entries_[{j.at("query_norm").get<std::string>(), j.at("k").get<int>()}] =
        [&] {
          std::vector<SearchResult> rs;
          for (const auto& r : j.at("results")) {
            rs.push_back({r.value("title", ""), r.value("snippet", ""), r.at("url").get<std::string>(),
                          r.value("backend", ""), r.value("rank", static_cast<int>(rs.size()) + 1)});
          }
          return rs;
        }();
  }
}

std::optional<std::vector<SearchResult>> SearchCache::lookup(const std::string& query, int k) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find({normalize_query(query), k});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void SearchCache::record(const std::string& query, int k, const std::vector<SearchResult>& results,
                         const std::string& ts) {
  std::unique_lock lock(mu_);
  const std::string norm = normalize_query(query);
  json arr = json::array();
  for (const auto& r : results) arr.push_back(result_to_json(r, true));
  nlohmann::ordered_json line;
  line["query_norm"] = norm;
  line["k"] = k;
  line["results"] = arr;
  line["ts"] = ts;
  io::append_lines(file_, {line.dump(-1, ' ', false, json::error_handler_t::replace)});
  entries_[{norm, k}] = results;
}

std::size_t SearchCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<SearchResult> merge_results(const std::vector<std::vector<SearchResult>>& per_backend, int k) {
  std::vector<SearchResult> out;
  std::unordered_set<std::string> seen;
  for (const auto& list : per_backend) {
    for (const auto& r : list) {
      if (static_cast<int>(out.size()) >= k) return out;
      if (!seen.insert(normalize_url_key(r.url)).second) continue;
      out.push_back(r);
      out.back().rank = static_cast<int>(out.size());
    }
  }
  return out;
}

MetaSearch::MetaSearch(std::vector<std::shared_ptr<SearchBackend>> backends, const Clock& clock,
                       MetaSearchOptions opts, std::shared_ptr<SearchCache> cache)
    : backends_(std::move(backends)), clock_(clock), opts_(opts), cache_(std::move(cache)) {
  std::stable_sort(backends_.begin(), backends_.end(),
                   [](const auto& a, const auto& b) { return a->spec().priority < b->spec().priority; });
  if (opts_.cache_mode != CacheMode::Off && !cache_) fail(ErrorCode::ConfigError, "cache mode needs a cache file");
}

namespace {

struct FanOut {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::optional<std::vector<SearchResult>>> results;
  std::vector<std::string> errors;
  std::vector<bool> finished;
  std::size_t done = 0;
};

void tidy(SearchResult& r) {
  r.title = text::collapse_whitespace(r.title);
  r.snippet = text::collapse_whitespace(r.snippet);
  if (text::utf8_length(r.snippet) > kSnippetMaxChars) r.snippet = text::utf8_truncate(r.snippet, kSnippetMaxChars);
}

}  // namespace

SearchResponse MetaSearch::search(const std::string& query, int k) {
  if (text::trim(query).empty()) fail(ErrorCode::EmptyQuery);
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  SearchResponse resp;
  if (opts_.cache_mode != CacheMode::Off) {
    if (auto hit = cache_->lookup(query, k)) {
      resp.results = std::move(*hit);
      resp.from_cache = true;
      for (const auto& r : resp.results)
        if (std::find(resp.served_by.begin(), resp.served_by.end(), r.backend) == resp.served_by.end())
          resp.served_by.push_back(r.backend);
      resp.downgraded = !backends_.empty() && !resp.results.empty() && resp.served_by.front() != backends_.front()->spec().name;
      return resp;
    }
    if (opts_.cache_mode == CacheMode::Replay) fail(ErrorCode::ReplayMiss, query);
  }
  if (backends_.empty()) fail(ErrorCode::AllBackendsFailed, "no backends");

  const std::size_t n = backends_.size();
  auto state = std::make_shared<FanOut>();
  state->results.resize(n);
  state->errors.resize(n);
  state->finished.assign(n, false);
  const auto budget = std::min(opts_.backend_timeout, opts_.overall_timeout);
  for (std::size_t i = 0; i < n; ++i) {
    // Detached so a stuck backend cannot hold the caller past the deadline.
    std::thread([state, backend = backends_[i], query, k, budget, i] {
      std::optional<std::vector<SearchResult>> res;
      std::string err;
      try {
        res = backend->search(query, k, budget);
      } catch (const std::exception& e) {
        err = e.what();
      }
      std::lock_guard lock(state->mu);
      state->results[i] = std::move(res);
      state->errors[i] = std::move(err);
      state->finished[i] = true;
      ++state->done;
      state->cv.notify_all();
    }).detach();
  }
  std::vector<std::vector<SearchResult>> lists(n);
  {
    std::unique_lock lock(state->mu);
    state->cv.wait_for(lock, budget, [&] { return state->done == n; });
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& name = backends_[i]->spec().name;
      if (!state->finished[i]) resp.failures[name] = "Timeout(" + name + ")";
      else if (!state->errors[i].empty()) resp.failures[name] = state->errors[i];
      else lists[i] = *state->results[i];
    }
  }
  for (auto& list : lists)
    for (auto& r : list) tidy(r);
  for (const auto& [name, err] : resp.failures) log::warn("metasearch", name, "backend failed", {{"error", err}});
  if (resp.failures.size() == n) fail(ErrorCode::AllBackendsFailed, query);
  resp.results = merge_results(lists, k);
  for (const auto& r : resp.results)
    if (std::find(resp.served_by.begin(), resp.served_by.end(), r.backend) == resp.served_by.end())
      resp.served_by.push_back(r.backend);
  resp.downgraded = resp.served_by.empty() || resp.served_by.front() != backends_.front()->spec().name;
  if (opts_.cache_mode == CacheMode::Record) cache_->record(query, k, resp.results, format_utc(clock_.now()));
  return resp;
}

std::vector<SearchBackendSpec> default_backend_specs() {
  return {{"duckduckgo", "html-scrape", "https://html.duckduckgo.com/html/", 0},
          {"wikipedia", "wiki-api", "https://en.wikipedia.org/w/api.php", 1}};
}

std::vector<std::shared_ptr<SearchBackend>> backends_from_config(const json& config,
                                                                 const std::filesystem::path& base_dir,
                                                                 std::shared_ptr<HttpTransport> transport) {
  std::vector<SearchBackendSpec> specs;
  if (config.contains("backends")) {
    int order = 0;
    for (const auto& b : config["backends"]) {
      SearchBackendSpec s;
      s.name = b.at("name").get<std::string>();
      s.kind = b.at("kind").get<std::string>();
      s.endpoint = b.at("endpoint").get<std::string>();
      s.priority = b.value("priority", order);
      if (s.kind == "fixture" && std::filesystem::path(s.endpoint).is_relative())
        s.endpoint = (base_dir / s.endpoint).string();
      specs.push_back(std::move(s));
      ++order;
    }
  } else {
    specs = default_backend_specs();
  }
  std::vector<std::shared_ptr<SearchBackend>> out;
  for (const auto& s : specs) out.push_back(make_backend(s, transport));
  return out;
}

std::pair<int, std::string> handle_search_request(MetaSearch& search, std::string_view body) {
  auto error = [](int status, const std::string& msg) { return std::pair{status, json{{"error", msg}}.dump()}; };
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error(400, "body is not JSON");
  }
  if (!req.is_object() || !req.contains("query") || !req["query"].is_string()) return error(400, "query must be a string");
  int k = 5;
  if (req.contains("topk")) {
    if (!req["topk"].is_number_integer()) return error(400, "topk must be an integer");
    k = req["topk"].get<int>();
  }
  try {
    const auto resp = search.search(req["query"].get<std::string>(), k);
    json results = json::array();
    for (const auto& r : resp.results) results.push_back(result_to_json(r, false));
    return {200, json{{"results", results}}.dump(-1, ' ', false, json::error_handler_t::replace)};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::EmptyQuery:
      case ErrorCode::InvalidArgument: return error(400, e.what());
      case ErrorCode::ReplayMiss: return error(404, e.what());
      default: return error(502, e.what());
    }
  }
}

struct SearchServer::Impl {
  MetaSearch& search;
  httplib::Server server;
  explicit Impl(MetaSearch& s) : search(s) {}
};

SearchServer::SearchServer(MetaSearch& search) : impl_(std::make_unique<Impl>(search)) {
  impl_->server.Post("/search", [this](const httplib::Request& req, httplib::Response& res) {
    const auto [status, body] = handle_search_request(impl_->search, req.body);
    res.status = status;
    res.set_content(body, "application/json");
  });
}

SearchServer::~SearchServer() { stop(); }

int SearchServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void SearchServer::run() { impl_->server.listen_after_bind(); }

void SearchServer::stop() { impl_->server.stop(); }

}  // namespace orbit
