#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace orbit {

/// robots.txt rules for one user agent. Longest matching rule wins; Allow
/// wins ties. Supports '*' wildcards and a trailing '$' anchor.
class RobotsRules {
 public:
  RobotsRules() = default;
  /// Picks the group whose User-agent token is a case-insensitive substring
  /// of `user_agent`'s product name, falling back to the '*' group.
  static RobotsRules parse(std::string_view robots_txt, std::string_view user_agent);

  bool allowed(std::string_view path_and_query) const;

 private:
  struct Rule {
    bool allow;
    std::string pattern;
  };
  std::vector<Rule> rules_;
};

}  // namespace orbit
