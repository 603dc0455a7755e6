#include "orbit/url.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "orbit/text.hpp"

namespace orbit {

std::string Url::origin() const {
  std::string out = scheme + "://" + host;
  if (port && port != (scheme == "https" ? 443 : 80)) out += ":" + std::to_string(port);
  return out;
}

std::string Url::target() const {
  std::string out = path.empty() ? "/" : path;
  if (!query.empty()) out += "?" + query;
  return out;
}

std::string Url::str() const {
  std::string out = origin() + target();
  if (!fragment.empty()) out += "#" + fragment;
  return out;
}

std::optional<Url> parse_http_url(std::string_view s) {
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) < 0x20) return std::nullopt;
  }
  const auto sep = s.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Url u;
  u.scheme = text::to_lower(s.substr(0, sep));
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  std::string_view rest = s.substr(sep + 3);
  const auto auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
  std::string_view host = authority;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    authority = authority.substr(close + 1);
    if (!authority.empty() && authority.front() != ':') return std::nullopt;
  } else {
    const auto colon = authority.find(':');
    host = authority.substr(0, colon);
    authority = colon == std::string_view::npos ? std::string_view{} : authority.substr(colon);
  }
  if (!authority.empty()) {  // ":port"
    const std::string_view digits = authority.substr(1);
    if (digits.empty() || digits.size() > 5) return std::nullopt;
    int port = 0;
    for (char c : digits) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      port = port * 10 + (c - '0');
    }
    if (port <= 0 || port > 65535) return std::nullopt;
    u.port = port;
  }
  if (host.empty()) return std::nullopt;
  for (char c : host) {
    const auto uc = static_cast<unsigned char>(c);
    if (!(std::isalnum(uc) || c == '.' || c == '-' || c == '_' || c == '[' || c == ']' || c == ':' || uc >= 0x80))
      return std::nullopt;
  }
  if (host.front() == '.' || host.front() == '-') return std::nullopt;
  u.host = text::to_lower(host);
  if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
    u.fragment = std::string(rest.substr(hash + 1));
    rest = rest.substr(0, hash);
  }
  if (const auto q = rest.find('?'); q != std::string_view::npos) {
    u.query = std::string(rest.substr(q + 1));
    rest = rest.substr(0, q);
  }
  u.path = rest.empty() ? "/" : std::string(rest);
  return u;
}

bool is_absolute_http_url(std::string_view s) { return parse_http_url(s).has_value(); }

namespace {

std::string remove_dot_segments(const std::string& path) {
  std::vector<std::string> out;
  const auto parts = text::split(path, '/');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p == ".") {
      if (i + 1 == parts.size()) out.emplace_back();
      continue;
    }
    if (p == "..") {
      if (out.size() > 1) out.pop_back();
      if (i + 1 == parts.size()) out.emplace_back();
      continue;
    }
    out.push_back(p);
  }
  std::string joined = text::join(out, "/");
  if (joined.empty() || joined.front() != '/') joined.insert(joined.begin(), '/');
  return joined;
}

}  // namespace

std::optional<Url> resolve_url(const Url& base, std::string_view ref) {
  const std::string r = text::trim(ref);
  if (r.empty()) return base;
  if (r.find("://") != std::string::npos) return parse_http_url(r);
  if (r.rfind("//", 0) == 0) return parse_http_url(base.scheme + ":" + r);
  Url u = base;
  u.fragment.clear();
  std::string_view rest = r;
  if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
    u.fragment = std::string(rest.substr(hash + 1));
    rest = rest.substr(0, hash);
  }
  std::string path(rest);
  std::string query;
  if (const auto q = path.find('?'); q != std::string::npos) {
    query = path.substr(q + 1);
    path.resize(q);
  }
  if (path.empty()) {
    if (!query.empty()) u.query = query;
    return u;
  }
  if (path.front() != '/') {
    const auto slash = base.path.rfind('/');
    path = base.path.substr(0, slash == std::string::npos ? 0 : slash + 1) + path;
  }
  u.path = remove_dot_segments(path);
  u.query = query;
  return u;
}

std::string normalize_url_key(std::string_view s) {
  auto u = parse_http_url(text::trim(s));
  if (!u) return text::to_lower(text::trim(s));
  std::string host = u->host;
  if (host.rfind("www.", 0) == 0) host = host.substr(4);
  std::string path = u->path;
  while (path.size() > 1 && path.back() == '/') path.pop_back();
  if (path == "/") path.clear();
  std::string key = host;
  if (u->port && u->port != 80 && u->port != 443) key += ":" + std::to_string(u->port);
  key += path;
  if (!u->query.empty()) key += "?" + u->query;
  return key;
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size() * 3);
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string url_decode(std::string_view s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out.push_back(' ');
    } else if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2])));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> scan_urls(std::string_view text) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t start = std::string_view::npos;
    for (std::size_t i = pos; i + 7 <= text.size(); ++i) {
      if (text::istarts_with(text.substr(i), "http://") || text::istarts_with(text.substr(i), "https://")) {
        // must not be glued to a preceding word character (e.g. "xhttp://")
        if (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1]))) continue;
        start = i;
        break;
      }
    }
    if (start == std::string_view::npos) break;
    std::size_t end = start;
    while (end < text.size()) {
      const auto c = static_cast<unsigned char>(text[end]);
      if (std::isspace(c) || c == '<' || c == '>' || c == '"' || c == '`' || c == '|' || c == '{' ||
          c == '}' || c == '\\' || c == '^' || c < 0x20)
        break;
      ++end;
    }
    std::string candidate(text.substr(start, end - start));
    // trailing punctuation and unbalanced closers
    while (!candidate.empty()) {
      const char last = candidate.back();
      if (last == '.' || last == ',' || last == ';' || last == ':' || last == '!' || last == '?' ||
          last == '\'' || last == '*') {
        candidate.pop_back();
        continue;
      }
      if (last == ')' || last == ']') {
        const char open = last == ')' ? '(' : '[';
        const auto opens = std::count(candidate.begin(), candidate.end(), open);
        const auto closes = std::count(candidate.begin(), candidate.end(), last);
        if (closes > opens) {
          candidate.pop_back();
          continue;
        }
      }
      break;
    }
    pos = end > start ? end : start + 1;
    if (!parse_http_url(candidate)) continue;
    if (const auto u = parse_http_url(candidate); u->host.find('.') == std::string::npos && u->host != "localhost")
      continue;
    if (seen.insert(candidate).second) out.push_back(std::move(candidate));
  }
  return out;
}

}  // namespace orbit
