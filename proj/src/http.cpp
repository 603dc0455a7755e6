#include "orbit/http.hpp"

#include <curl/curl.h>

#include "json.hpp"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"

namespace orbit {

namespace {

struct CurlSink {
  std::string body;
  std::map<std::string, std::string> headers;
  std::size_t max_bytes = 0;
  bool too_large = false;
};

std::size_t on_body(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  auto* sink = static_cast<CurlSink*>(user);
  const std::size_t n = size * nmemb;
  if (sink->max_bytes && sink->body.size() + n > sink->max_bytes) {
    sink->too_large = true;
    return 0;
  }
  sink->body.append(ptr, n);
  return n;
}

std::size_t on_header(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  auto* sink = static_cast<CurlSink*>(user);
  const std::size_t n = size * nmemb;
  const std::string line(ptr, n);
  if (line.rfind("HTTP/", 0) == 0) sink->headers.clear();  // new response in a chain
  const auto colon = line.find(':');
  if (colon != std::string::npos)
    sink->headers[text::to_lower(text::trim(line.substr(0, colon)))] = text::trim(line.substr(colon + 1));
  return n;
}

}  // namespace

CurlTransport::CurlTransport() { curl_global_init(CURL_GLOBAL_DEFAULT); }
CurlTransport::~CurlTransport() = default;

HttpResponse CurlTransport::send(const HttpRequest& req) {
  CURL* h = curl_easy_init();
  if (!h) fail(ErrorCode::IoError, "curl_easy_init");
  CurlSink sink;
  sink.max_bytes = req.max_bytes;
  curl_slist* hdrs = nullptr;
  for (const auto& [k, v] : req.headers) hdrs = curl_slist_append(hdrs, (k + ": " + v).c_str());
  curl_easy_setopt(h, CURLOPT_URL, req.url.c_str());
  curl_easy_setopt(h, CURLOPT_FOLLOWLOCATION, 0L);
  curl_easy_setopt(h, CURLOPT_TIMEOUT_MS, req.timeout_ms);
  curl_easy_setopt(h, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h, CURLOPT_ACCEPT_ENCODING, "");
  curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, on_body);
  curl_easy_setopt(h, CURLOPT_WRITEDATA, &sink);
  curl_easy_setopt(h, CURLOPT_HEADERFUNCTION, on_header);
  curl_easy_setopt(h, CURLOPT_HEADERDATA, &sink);
  if (hdrs) curl_easy_setopt(h, CURLOPT_HTTPHEADER, hdrs);
  if (req.method == "POST") {
    curl_easy_setopt(h, CURLOPT_POST, 1L);
    curl_easy_setopt(h, CURLOPT_POSTFIELDS, req.body.c_str());
    curl_easy_setopt(h, CURLOPT_POSTFIELDSIZE, static_cast<long>(req.body.size()));
  } else if (req.method != "GET") {
    curl_easy_setopt(h, CURLOPT_CUSTOMREQUEST, req.method.c_str());
  }
  const CURLcode rc = curl_easy_perform(h);
  long status = 0;
  curl_easy_getinfo(h, CURLINFO_RESPONSE_CODE, &status);
  curl_slist_free_all(hdrs);
  curl_easy_cleanup(h);
  if (sink.too_large) fail(ErrorCode::TooLarge, req.url);
  switch (rc) {
    case CURLE_OK: break;
    case CURLE_OPERATION_TIMEDOUT: fail(ErrorCode::Timeout, req.url);
    case CURLE_COULDNT_RESOLVE_HOST:
    case CURLE_COULDNT_RESOLVE_PROXY: fail(ErrorCode::DnsFailure, req.url);
    default: fail(ErrorCode::HttpError, std::string(curl_easy_strerror(rc)) + ": " + req.url);
  }
  HttpResponse resp;
  resp.status = static_cast<int>(status);
  resp.headers = std::move(sink.headers);
  resp.body = std::move(sink.body);
  return resp;
}

void FixtureTransport::route(const std::string& url, HttpResponse resp) {
  route(url, [resp = std::move(resp)](const HttpRequest&) { return resp; });
}

void FixtureTransport::route(const std::string& url, Handler handler) {
  std::lock_guard lock(mu_);
  routes_[url] = std::move(handler);
}

void FixtureTransport::route_sequence(const std::string& url, std::vector<HttpResponse> responses) {
  if (responses.empty()) fail(ErrorCode::InvalidArgument, "empty response sequence for " + url);
  auto state = std::make_shared<std::pair<std::mutex, std::size_t>>();
  route(url, [state, responses = std::move(responses)](const HttpRequest&) {
    std::lock_guard lock(state->first);
    const std::size_t i = std::min(state->second++, responses.size() - 1);
    return responses[i];
  });
}

namespace {

// A response spec; "error" makes the transport throw instead of answering.
struct FixtureResponse {
  HttpResponse resp;
  std::string error;
};

FixtureResponse fixture_response(const nlohmann::json& j, const std::filesystem::path& dir) {
  FixtureResponse out;
  out.error = j.value("error", "");
  out.resp.status = j.value("status", 200);
  if (j.contains("headers")) {
    for (const auto& [k, v] : j["headers"].items()) out.resp.headers[text::to_lower(k)] = v.get<std::string>();
  }
  if (j.contains("body_file")) out.resp.body = io::read_file(dir / j["body_file"].get<std::string>());
  else out.resp.body = j.value("body", "");
  if (!out.resp.headers.count("content-type") && j.contains("content_type"))
    out.resp.headers["content-type"] = j["content_type"].get<std::string>();
  return out;
}

}  // namespace

void FixtureTransport::load_routes(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  const auto dir = path.parent_path();
  for (const auto& r : j.value("routes", nlohmann::json::array())) {
    if (!r.contains("url")) fail(ErrorCode::ConfigError, path.string() + ": route without url");
    std::vector<FixtureResponse> seq{fixture_response(r, dir)};
    for (const auto& next : r.value("then", nlohmann::json::array())) seq.push_back(fixture_response(next, dir));
    auto state = std::make_shared<std::pair<std::mutex, std::size_t>>();
    route(r["url"].get<std::string>(), [state, seq = std::move(seq)](const HttpRequest& req) {
      std::size_t i;
      {
        std::lock_guard lock(state->first);
        i = std::min(state->second++, seq.size() - 1);
      }
      if (seq[i].error == "timeout") fail(ErrorCode::Timeout, req.url);
      if (seq[i].error == "dns") fail(ErrorCode::DnsFailure, req.url);
      return seq[i].resp;
    });
  }
}

HttpResponse FixtureTransport::send(const HttpRequest& req) {
  Handler handler;
  {
    std::lock_guard lock(mu_);
    calls_.push_back({req.method, req.url, clock_ ? clock_->now() : std::chrono::system_clock::now()});
    auto it = routes_.find(req.url);
    if (it != routes_.end()) handler = it->second;
  }
  if (!handler) {
    HttpResponse r;
    r.status = 404;
    r.headers["content-type"] = "text/plain";
    r.body = "not found";
    return r;
  }
  HttpResponse resp = handler(req);
  if (req.max_bytes && resp.body.size() > req.max_bytes) fail(ErrorCode::TooLarge, req.url);
  return resp;
}

std::vector<FixtureTransport::Call> FixtureTransport::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

HttpResponse FixtureTransport::html(std::string body, int status) {
  HttpResponse r;
  r.status = status;
  r.headers["content-type"] = "text/html; charset=utf-8";
  r.body = std::move(body);
  return r;
}

HttpResponse FixtureTransport::json(std::string body, int status) {
  HttpResponse r;
  r.status = status;
  r.headers["content-type"] = "application/json";
  r.body = std::move(body);
  return r;
}

HttpResponse FixtureTransport::redirect(std::string location, int status) {
  HttpResponse r;
  r.status = status;
  r.headers["location"] = std::move(location);
  return r;
}

}  // namespace orbit
