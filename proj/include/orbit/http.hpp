#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "orbit/clock.hpp"

namespace orbit {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  long timeout_ms = 15000;
  std::size_t max_bytes = 0;  // 0 = unlimited
};

struct HttpResponse {
  int status = 0;
  std::map<std::string, std::string> headers;  // lowercase names
  std::string body;

  std::string header(const std::string& lower_name) const {
    auto it = headers.find(lower_name);
    return it == headers.end() ? std::string{} : it->second;
  }
};

/// One request, no redirect following. Transport failures throw
/// Error(Timeout | DnsFailure | TooLarge | HttpError).
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& req) = 0;
};

class CurlTransport final : public HttpTransport {
 public:
  CurlTransport();
  ~CurlTransport() override;
  HttpResponse send(const HttpRequest& req) override;
};

/// In-memory transport for tests and replay fixtures. Routes match the full
/// URL exactly; unrouted requests get 404.
class FixtureTransport final : public HttpTransport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;

  struct Call {
    std::string method;
    std::string url;
    Clock::time_point at;
  };

  explicit FixtureTransport(const Clock* clock = nullptr) : clock_(clock) {}

  void route(const std::string& url, HttpResponse resp);
  void route(const std::string& url, Handler handler);
  /// Responses served in order; the last one repeats.
  void route_sequence(const std::string& url, std::vector<HttpResponse> responses);
  /// Loads {"routes":[{"url", "status", "headers", "body" | "body_file",
  /// "error": "timeout"|"dns", "then": [...]}]}; body_file is relative to
  /// the fixture file.
  void load_routes(const std::filesystem::path& path);
  HttpResponse send(const HttpRequest& req) override;
  std::vector<Call> calls() const;

  static HttpResponse html(std::string body, int status = 200);
  static HttpResponse json(std::string body, int status = 200);
  static HttpResponse redirect(std::string location, int status = 301);

 private:
  const Clock* clock_;
  mutable std::mutex mu_;
  std::map<std::string, Handler> routes_;
  std::vector<Call> calls_;
};

}  // namespace orbit
