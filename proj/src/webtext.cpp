#include "orbit/webtext.hpp"

#include <algorithm>
#include <set>

#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/parallel.hpp"
#include "orbit/text.hpp"

namespace orbit {

using nlohmann::json;

Fetcher::Fetcher(HttpTransport& transport, HostRateLimiter& limiter, const Clock& clock, FetchPolicy policy)
    : transport_(transport), limiter_(limiter), clock_(clock), policy_(std::move(policy)) {}

HttpResponse Fetcher::send_paced(const std::string& url, const std::string& host) {
  HttpRequest req;
  req.url = url;
  req.timeout_ms = policy_.timeout_ms;
  req.max_bytes = policy_.max_bytes;
  req.headers.emplace_back("User-Agent", policy_.user_agent);
  req.headers.emplace_back("Accept", "text/html,application/xhtml+xml;q=0.9,*/*;q=0.5");
  for (int attempt = 0;; ++attempt) {
    limiter_.acquire(host);
    try {
      HttpResponse resp = transport_.send(req);
      if (resp.status >= 500 && attempt < policy_.max_retries) continue;
      if (policy_.max_bytes && resp.body.size() > policy_.max_bytes) fail(ErrorCode::TooLarge, url);
      return resp;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout && attempt < policy_.max_retries) continue;
      throw;
    }
  }
}

bool Fetcher::robots_allow(const Url& u) {
  const std::string origin = u.origin();
  std::shared_ptr<RobotsRules> rules;
  {
    std::lock_guard lock(robots_mu_);
    if (auto it = robots_.find(origin); it != robots_.end()) rules = it->second;
  }
  if (!rules) {
    auto fresh = std::make_shared<RobotsRules>();
    try {
      const HttpResponse resp = send_paced(origin + "/robots.txt", u.host);
      if (resp.status >= 200 && resp.status < 300) *fresh = RobotsRules::parse(resp.body, policy_.user_agent);
    } catch (const Error&) {
      // unreachable robots.txt: treated as no restrictions
    }
    std::lock_guard lock(robots_mu_);
    rules = robots_.emplace(origin, fresh).first->second;
  }
  return rules->allowed(u.target());
}

RawPage Fetcher::fetch(const std::string& url) {
  auto current = parse_http_url(url);
  if (!current) fail(ErrorCode::InvalidUrl, url);
  for (int hop = 0;; ++hop) {
    if (policy_.respect_robots && !robots_allow(*current)) fail(ErrorCode::RobotsDisallowed, current->str());
    const std::string target = current->origin() + current->target();
    const HttpResponse resp = send_paced(target, current->host);
    const int s = resp.status;
    if (s == 301 || s == 302 || s == 303 || s == 307 || s == 308) {
      const std::string location = resp.header("location");
      if (location.empty()) fail(ErrorCode::HttpError, std::to_string(s));
      if (hop >= policy_.max_redirects) fail(ErrorCode::TooManyRedirects, url);
      auto next = resolve_url(*current, location);
      if (!next) fail(ErrorCode::InvalidUrl, location);
      current = next;
      continue;
    }
    if (s < 200 || s >= 300) fail(ErrorCode::HttpError, std::to_string(s));
    RawPage page;
    page.url = url;
    page.final_url = target;
    page.http_status = s;
    const std::string ct = text::to_lower(resp.header("content-type"));
    page.content_type = text::trim(ct.substr(0, ct.find(';')));
    if (const auto at = ct.find("charset="); at != std::string::npos) {
      std::string cs = ct.substr(at + 8);
      cs = cs.substr(0, cs.find(';'));
      cs.erase(std::remove(cs.begin(), cs.end(), '"'), cs.end());
      page.charset = text::trim(cs);
    }
    page.body = resp.body;
    page.fetched_at = format_utc(clock_.now());
    return page;
  }
}

namespace {

bool is_latin1_family(const std::string& cs) {
  return cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1" || cs == "windows-1252" || cs == "cp1252" ||
         cs == "us-ascii" || cs == "iso-8859-15";
}

std::string meta_charset(std::string_view body) {
  const std::string head = text::to_lower(body.substr(0, std::min<std::size_t>(body.size(), 4096)));
  const auto at = head.find("charset=");
  if (at == std::string::npos) return {};
  std::size_t i = at + 8;
  while (i < head.size() && (head[i] == '"' || head[i] == '\'' || head[i] == ' ')) ++i;
  std::size_t j = i;
  while (j < head.size() && (std::isalnum(static_cast<unsigned char>(head[j])) || head[j] == '-' || head[j] == '_')) ++j;
  return head.substr(i, j - i);
}

bool is_textual(const std::string& ct) {
  return ct.empty() || ct == "text/html" || ct == "application/xhtml+xml" || ct == "text/plain" ||
         ct == "application/xml" || ct == "text/xml";
}

const std::set<std::string>& dropped_tags() {
  static const std::set<std::string> s = {"script", "style", "nav", "footer", "aside", "noscript", "template", "svg"};
  return s;
}
const std::set<std::string>& kept_tags() {
  static const std::set<std::string> s = {"p",  "h1", "h2", "h3", "h4", "h5", "h6", "li",         "dt",
                                          "dd", "td", "th", "caption", "pre", "blockquote", "figcaption"};
  return s;
}
const std::set<std::string>& void_tags() {
  static const std::set<std::string> s = {"area", "base", "br",   "col",   "embed", "hr",    "img",
                                          "input", "link", "meta", "param", "source", "track", "wbr"};
  return s;
}
// Opening one of these implicitly ends an open paragraph.
const std::set<std::string>& closes_p() {
  static const std::set<std::string> s = {"address", "article", "blockquote", "div", "dl", "fieldset", "form",
                                          "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "ol",
                                          "p", "pre", "section", "table", "ul", "figure", "details"};
  return s;
}

struct Tag {
  std::string name;
  bool closing = false;
  bool self_closing = false;
  std::size_t end = 0;  // index after '>'
};

// Parses a tag starting at s[i] == '<'. Returns nullopt for stray '<'.
std::optional<Tag> read_tag(std::string_view s, std::size_t i) {
  Tag t;
  std::size_t j = i + 1;
  if (j < s.size() && s[j] == '/') {
    t.closing = true;
    ++j;
  }
  const std::size_t name_start = j;
  while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '-' || s[j] == ':')) ++j;
  if (j == name_start || !std::isalpha(static_cast<unsigned char>(s[name_start]))) return std::nullopt;
  t.name = text::to_lower(s.substr(name_start, j - name_start));
  char quote = 0;
  for (; j < s.size(); ++j) {
    const char c = s[j];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      t.self_closing = j > i + 1 && s[j - 1] == '/';
      t.end = j + 1;
      return t;
    }
  }
  t.end = s.size();
  return t;
}

struct Extractor {
  std::vector<std::string> blocks;
  std::string current;
  std::vector<std::string> open_kept;
  std::vector<std::string> dropped;
  std::optional<std::string> h1;
  std::string title;
  bool in_title = false;
  int h1_depth = 0;
  std::string h1_text;

  void flush() {
    std::string b = text::collapse_whitespace(text::decode_entities(current));
    current.clear();
    if (!b.empty()) blocks.push_back(std::move(b));
  }
  void pop_until(const std::string& name) {
    auto it = std::find(open_kept.rbegin(), open_kept.rend(), name);
    if (it == open_kept.rend()) return;
    flush();
    open_kept.erase(std::next(it).base(), open_kept.end());
  }
  void pop_any(const std::set<std::string>& names) {
    while (!open_kept.empty() && names.count(open_kept.back())) {
      flush();
      open_kept.pop_back();
    }
  }

  void run(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] != '<') {
        const std::size_t next = s.find('<', i);
        const std::string_view chunk = s.substr(i, next == std::string_view::npos ? s.size() - i : next - i);
        on_text(chunk);
        i = next == std::string_view::npos ? s.size() : next;
        continue;
      }
      if (s.substr(i, 4) == "<!--") {
        const auto e = s.find("-->", i + 4);
        i = e == std::string_view::npos ? s.size() : e + 3;
        continue;
      }
      if (i + 1 < s.size() && (s[i + 1] == '!' || s[i + 1] == '?')) {
        const auto e = s.find('>', i);
        i = e == std::string_view::npos ? s.size() : e + 1;
        continue;
      }
      const auto tag = read_tag(s, i);
      if (!tag) {
        on_text(s.substr(i, 1));
        ++i;
        continue;
      }
      i = tag->end;
      if (!tag->closing && (tag->name == "script" || tag->name == "style") && !tag->self_closing) {
        // raw text content: skip straight to the matching end tag
        std::size_t k = i;
        while (k < s.size() && !(s[k] == '<' && k + 1 < s.size() && s[k + 1] == '/' &&
                                 text::iequals(s.substr(k + 2, tag->name.size()), tag->name)))
          ++k;
        const auto gt = s.find('>', k);
        i = gt == std::string_view::npos ? s.size() : gt + 1;
        continue;
      }
      on_tag(*tag);
    }
    flush();
  }

  void on_text(std::string_view t) {
    if (!dropped.empty()) return;
    if (in_title) title.append(t);
    if (h1_depth > 0) h1_text.append(t);
    if (!open_kept.empty()) current.append(t);
  }

  void on_tag(const Tag& t) {
    if (!dropped.empty()) {
      if (t.name == dropped.back() && !void_tags().count(t.name) && !t.self_closing) {
        if (t.closing) dropped.pop_back();
        else dropped.push_back(t.name);
      }
      return;
    }
    if (dropped_tags().count(t.name)) {
      if (!t.closing && !t.self_closing) dropped.push_back(t.name);
      return;
    }
    if (t.name == "title") {
      in_title = !t.closing;
      return;
    }
    if (t.name == "h1") {
      if (!t.closing) {
        ++h1_depth;
      } else if (h1_depth > 0 && --h1_depth == 0 && !h1) {
        std::string v = text::collapse_whitespace(text::decode_entities(h1_text));
        if (!v.empty()) h1 = std::move(v);
        h1_text.clear();
      }
    }
    if (t.name == "br") {
      current.push_back(' ');
      return;
    }
    if (void_tags().count(t.name)) return;
    if (!t.closing) {
      if (closes_p().count(t.name)) pop_any({"p"});
      if (t.name == "li") pop_any({"p", "li"});
      if (t.name == "dt" || t.name == "dd") pop_any({"p", "dt", "dd"});
      if (t.name == "td" || t.name == "th" || t.name == "tr") pop_any({"p", "td", "th"});
      if (kept_tags().count(t.name) && !t.self_closing) {
        flush();
        open_kept.push_back(t.name);
      }
      return;
    }
    if (kept_tags().count(t.name)) {
      pop_until(t.name);
    } else if (t.name == "ul" || t.name == "ol") {
      pop_any({"p", "li"});
    } else if (t.name == "tr" || t.name == "table") {
      pop_any({"p", "td", "th"});
    } else if (t.name == "dl") {
      pop_any({"p", "dt", "dd"});
    } else if (t.name == "body" || t.name == "html") {
      while (!open_kept.empty()) {
        flush();
        open_kept.pop_back();
      }
    } else if (t.name == "div" || t.name == "section" || t.name == "article" || t.name == "main") {
      pop_any({"p"});
    }
  }
};

}  // namespace

std::string decode_body(const RawPage& raw) {
  std::string cs = raw.charset;
  if (cs.empty() && (raw.content_type.empty() || raw.content_type.find("html") != std::string::npos))
    cs = meta_charset(raw.body);
  if (is_latin1_family(cs) && !text::is_valid_utf8(raw.body)) return text::latin1_to_utf8(raw.body);
  if (is_latin1_family(cs) && cs != "us-ascii") {
    // declared Latin-1 but valid UTF-8 bytes: only convert when high bytes exist
    bool high = std::any_of(raw.body.begin(), raw.body.end(), [](char c) { return static_cast<unsigned char>(c) >= 0x80; });
    return high ? text::latin1_to_utf8(raw.body) : raw.body;
  }
  return text::sanitize_utf8(raw.body);
}

WebDocument extract_main_text(const RawPage& raw) {
  if (!is_textual(raw.content_type)) fail(ErrorCode::NotHtml, raw.content_type);
  if (raw.content_type.empty() && raw.body.find('\0') != std::string::npos) fail(ErrorCode::NotHtml, "binary body");
  WebDocument doc;
  doc.url = raw.url;
  doc.final_url = raw.final_url.empty() ? raw.url : raw.final_url;
  doc.http_status = raw.http_status;
  doc.fetched_at = raw.fetched_at;
  const std::string body = decode_body(raw);
  if (raw.content_type == "text/plain") {
    std::vector<std::string> paras;
    std::string cur;
    for (const auto& line : text::split_lines(body)) {
      if (text::trim(line).empty()) {
        if (auto p = text::collapse_whitespace(cur); !p.empty()) paras.push_back(p);
        cur.clear();
      } else {
        cur += line + "\n";
      }
    }
    if (auto p = text::collapse_whitespace(cur); !p.empty()) paras.push_back(p);
    doc.text = text::join(paras, "\n\n");
    return doc;
  }
  Extractor ex;
  ex.run(body);
  doc.text = text::join(ex.blocks, "\n\n");
  if (ex.h1) {
    doc.title = ex.h1;
  } else if (auto t = text::collapse_whitespace(text::decode_entities(ex.title)); !t.empty()) {
    doc.title = t;
  }
  return doc;
}

std::string EvidenceBundle::render() const {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += "\n\n";
    out += "URL: " + blocks[i].url + "\nContent: " + blocks[i].text;
  }
  return out;
}

EvidenceBundle build_evidence_bundle(const TrainingExample& record, const std::map<std::string, WebDocument>& docs,
                                     std::size_t total_budget) {
  std::vector<EvidenceRef> refs = record.evidence;
  std::stable_sort(refs.begin(), refs.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  EvidenceBundle bundle;
  std::vector<std::pair<const EvidenceRef*, const WebDocument*>> live;
  for (const auto& ref : refs) {
    auto it = docs.find(ref.url);
    if (it == docs.end()) bundle.missing.push_back(ref.index);
    else live.emplace_back(&ref, &it->second);
  }
  if (live.empty()) fail(ErrorCode::NoLiveEvidence, record.id);
  bundle.per_doc_budget = total_budget / live.size();
  const std::size_t marker_len = text::utf8_length(kTruncationMarker);
  for (const auto& [ref, doc] : live) {
    EvidenceBlock b{ref->index, ref->url, doc->text, false};
    if (text::utf8_length(b.text) > bundle.per_doc_budget) {
      b.truncated = true;
      if (bundle.per_doc_budget >= marker_len) {
        b.text = text::utf8_truncate(b.text, bundle.per_doc_budget - marker_len) + std::string(kTruncationMarker);
      } else {
        b.text = text::utf8_truncate(kTruncationMarker, bundle.per_doc_budget);
      }
    }
    bundle.blocks.push_back(std::move(b));
  }
  return bundle;
}

namespace {

json raw_to_json(const RawPage& r) {
  return {{"url", r.url},
          {"final_url", r.final_url},
          {"http_status", r.http_status},
          {"content_type", r.content_type},
          {"charset", r.charset},
          {"body", decode_body(r)},
          {"fetched_at", r.fetched_at}};
}

json doc_to_json(const WebDocument& d) {
  return {{"url", d.url},
          {"final_url", d.final_url},
          {"http_status", d.http_status},
          {"title", d.title ? json(*d.title) : json(nullptr)},
          {"text", d.text},
          {"fetched_at", d.fetched_at},
          {"truncated", d.truncated}};
}

WebDocument doc_from_json(const json& j) {
  WebDocument d;
  d.url = j.at("url").get<std::string>();
  d.final_url = j.at("final_url").get<std::string>();
  d.http_status = j.at("http_status").get<int>();
  if (j.contains("title") && j["title"].is_string()) d.title = j["title"].get<std::string>();
  d.text = j.at("text").get<std::string>();
  d.fetched_at = j.at("fetched_at").get<std::string>();
  d.truncated = j.value("truncated", false);
  return d;
}

RawPage raw_from_json(const json& j) {
  RawPage r;
  r.url = j.at("url").get<std::string>();
  r.final_url = j.at("final_url").get<std::string>();
  r.http_status = j.at("http_status").get<int>();
  r.content_type = j.value("content_type", "");
  r.charset = "utf-8";  // bodies are stored decoded
  r.body = j.at("body").get<std::string>();
  r.fetched_at = j.value("fetched_at", "");
  return r;
}

}  // namespace

std::filesystem::path WebCache::path_for(const std::string& url) const {
  const std::string h = sha256_hex(url);
  return root_ / "web" / h.substr(0, 2) / (h + ".json");
}

std::optional<FetchResult> WebCache::get(const std::string& url) const {
  const auto p = path_for(url);
  if (!std::filesystem::exists(p)) return std::nullopt;
  try {
    const json j = json::parse(io::read_file(p));
    if (j.value("url", "") != url) return std::nullopt;  // hash collision guard
    FetchResult r;
    if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    if (j.contains("raw") && j["raw"].is_object()) r.raw = raw_from_json(j["raw"]);
    if (j.contains("document") && j["document"].is_object()) r.doc = doc_from_json(j["document"]);
    return r;
  } catch (const json::exception&) {
    log::warn("fetch", url, "ignoring corrupt cache entry", {{"path", p.string()}});
    return std::nullopt;
  }
}

void WebCache::put(const std::string& url, const FetchResult& r) const {
  const auto p = path_for(url);
  std::filesystem::create_directories(p.parent_path());
  json j = {{"url", url}};
  if (r.raw) j["raw"] = raw_to_json(*r.raw);
  if (r.doc) j["document"] = doc_to_json(*r.doc);
  if (!r.error.empty()) j["error"] = r.error;
  io::write_file(p, j.dump(1, ' ', false, json::error_handler_t::replace) + "\n");
}

std::map<std::string, FetchResult> fetch_documents(const std::vector<std::string>& urls, Fetcher* fetcher,
                                                   const WebCache& cache, const FetchRunOptions& opts) {
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (const auto& u : urls) {
    if (seen.insert(u).second) unique.push_back(u);
  }
  std::vector<FetchResult> results(unique.size());
  parallel_for(unique.size(), opts.workers, [&](std::size_t i) {
    const std::string& url = unique[i];
    if (auto hit = cache.get(url)) {
      results[i] = std::move(*hit);
      return;
    }
    FetchResult r;
    if (opts.replay || !fetcher) {
      r.error = Error(ErrorCode::ReplayMiss, url).what();
      results[i] = std::move(r);
      return;
    }
    try {
      r.raw = fetcher->fetch(url);
      r.doc = extract_main_text(*r.raw);
    } catch (const Error& e) {
      r.error = e.what();
      log::info("fetch", url, "fetch failed", {{"error", r.error}});
    }
    cache.put(url, r);
    results[i] = std::move(r);
  });
  std::map<std::string, FetchResult> out;
  for (std::size_t i = 0; i < unique.size(); ++i) out.emplace(unique[i], std::move(results[i]));
  return out;
}

std::map<std::string, WebDocument> live_documents(const std::map<std::string, FetchResult>& results) {
  std::map<std::string, WebDocument> out;
  for (const auto& [url, r] : results) {
    if (r.doc && r.error.empty()) out.emplace(url, *r.doc);
  }
  return out;
}

}  // namespace orbit
