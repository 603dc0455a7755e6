#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "orbit/rng.hpp"

namespace orbit {

using TemplateVars = std::map<std::string, std::string>;

/// Prompt templates with `{name}` placeholders (name = [a-z_][a-z0-9_]*);
/// any other brace text is literal. A template may own an exemplar pool, in
/// which case `{exemplar}` is bound to one pool entry chosen by the RNG.
class TemplateSet {
 public:
  /// Templates compiled in from templates/*.txt; the "generation" template
  /// gets templates/exemplars/* as its pool.
  static TemplateSet builtin();

  /// Overrides from a directory laid out like templates/.
  void load_dir(const std::filesystem::path& dir);

  void set(const std::string& id, std::string text);
  void set_exemplar_pool(const std::string& id, std::vector<std::string> pool);
  bool has(const std::string& id) const { return templates_.count(id) > 0; }
  const std::string& raw(const std::string& id) const;
  const std::vector<std::string>& exemplar_pool(const std::string& id) const;

  /// Throws Error(UnknownTemplate) or Error(UnboundPlaceholder, name).
  std::string render(const std::string& id, const TemplateVars& vars, Rng* exemplar_rng = nullptr) const;

 private:
  std::map<std::string, std::string> templates_;
  std::map<std::string, std::vector<std::string>> pools_;
};

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(const std::string& tpl);

inline std::string render_prompt(const TemplateSet& set, const std::string& id, const TemplateVars& vars,
                                 Rng* exemplar_rng) {
  return set.render(id, vars, exemplar_rng);
}

}  // namespace orbit
