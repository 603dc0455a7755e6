#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orbit {

struct Url {
  std::string scheme;  // lowercase, "http" or "https"
  std::string host;    // lowercase
  int port = 0;        // 0 = scheme default
  std::string path;    // starts with '/'
  std::string query;   // without '?'
  std::string fragment;

  int effective_port() const { return port ? port : (scheme == "https" ? 443 : 80); }
  /// scheme://host[:port]
  std::string origin() const;
  /// path[?query]
  std::string target() const;
  std::string str() const;
};

/// Absolute http(s) URL or nullopt. Rejects whitespace, empty hosts and
/// non-numeric ports.
std::optional<Url> parse_http_url(std::string_view s);
bool is_absolute_http_url(std::string_view s);

/// Resolves a redirect Location (absolute, scheme-relative, absolute-path or
/// relative-path) against `base`.
std::optional<Url> resolve_url(const Url& base, std::string_view ref);

/// Dedup key: scheme-insensitive, lowercase host without "www.", no
/// fragment, no default port, no trailing slash.
std::string normalize_url_key(std::string_view s);

/// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string url_encode(std::string_view s);
/// Inverse of url_encode; '+' decodes to a space. Bad escapes pass through.
std::string url_decode(std::string_view s);

/// Scans free text for absolute http(s) URLs. Trailing sentence punctuation
/// and unbalanced closing brackets are not part of the URL. Order-preserving,
/// deduplicated.
std::vector<std::string> scan_urls(std::string_view text);

}  // namespace orbit
