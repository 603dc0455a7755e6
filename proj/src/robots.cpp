#include "orbit/robots.hpp"

#include "orbit/text.hpp"

namespace orbit {

namespace {

// Glob match of a robots pattern against a path prefix.
bool matches(std::string_view pattern, std::string_view path) {
  bool anchored = !pattern.empty() && pattern.back() == '$';
  if (anchored) pattern.remove_suffix(1);
  // iterative wildcard matching; the pattern is a prefix unless anchored
  std::size_t p = 0, s = 0, star_p = std::string_view::npos, star_s = 0;
  while (true) {
    if (p == pattern.size()) {
      if (!anchored || s == path.size()) return true;
    } else if (pattern[p] == '*') {
      star_p = p++;
      star_s = s;
      continue;
    } else if (s < path.size() && pattern[p] == path[s]) {
      ++p;
      ++s;
      continue;
    }
    if (star_p == std::string_view::npos || star_s >= path.size()) return false;
    p = star_p + 1;
    s = ++star_s;
  }
}

}  // namespace

RobotsRules RobotsRules::parse(std::string_view robots_txt, std::string_view user_agent) {
  std::string product = text::to_lower(user_agent.substr(0, user_agent.find('/')));
  struct Group {
    std::vector<std::string> agents;
    std::vector<Rule> rules;
  };
  std::vector<Group> groups;
  bool last_was_agent = false;
  for (const auto& raw : text::split_lines(robots_txt)) {
    std::string line = raw.substr(0, raw.find('#'));
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = text::to_lower(text::trim(line.substr(0, colon)));
    const std::string value = text::trim(line.substr(colon + 1));
    if (key == "user-agent") {
      if (!last_was_agent) groups.emplace_back();
      groups.back().agents.push_back(text::to_lower(value));
      last_was_agent = true;
    } else if (key == "allow" || key == "disallow") {
      last_was_agent = false;
      if (groups.empty()) continue;
      if (value.empty()) continue;  // "Disallow:" with no path allows everything
      groups.back().rules.push_back(Rule{key == "allow", value});
    } else {
      last_was_agent = false;
    }
  }
  RobotsRules out;
  const Group* star = nullptr;
  const Group* specific = nullptr;
  for (const auto& g : groups) {
    for (const auto& a : g.agents) {
      if (a == "*") {
        if (!star) star = &g;
      } else if (!product.empty() && product.find(a) != std::string::npos) {
        if (!specific) specific = &g;
      }
    }
  }
  if (const Group* g = specific ? specific : star) out.rules_ = g->rules;
  return out;
}

bool RobotsRules::allowed(std::string_view path) const {
  const Rule* best = nullptr;
  for (const auto& r : rules_) {
    if (!matches(r.pattern, path)) continue;
    if (!best || r.pattern.size() > best->pattern.size() ||
        (r.pattern.size() == best->pattern.size() && r.allow && !best->allow))
      best = &r;
  }
  return !best || best->allow;
}

}  // namespace orbit
