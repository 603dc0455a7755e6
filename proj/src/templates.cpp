#include "orbit/templates.hpp"

#include <algorithm>
#include <cctype>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"

namespace orbit {

namespace detail {
const std::vector<std::pair<std::string, std::string>>& builtin_template_files();
}

namespace {

constexpr const char* kExemplarDir = "exemplars/";
constexpr const char* kPoolOwner = "generation";

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Calls on_text / on_placeholder in document order.
template <typename Text, typename Hole>
void scan(const std::string& tpl, Text on_text, Hole on_placeholder) {
  std::size_t i = 0;
  while (i < tpl.size()) {
    const std::size_t open = tpl.find('{', i);
    if (open == std::string::npos) {
      on_text(std::string_view(tpl).substr(i));
      return;
    }
    std::size_t j = open + 1;
    if (j < tpl.size() && ident_start(tpl[j])) {
      while (j < tpl.size() && ident_char(tpl[j])) ++j;
      if (j < tpl.size() && tpl[j] == '}') {
        on_text(std::string_view(tpl).substr(i, open - i));
        on_placeholder(tpl.substr(open + 1, j - open - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(std::string_view(tpl).substr(i, open + 1 - i));
    i = open + 1;
  }
}

}  // namespace

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  std::vector<std::string> pool;
  for (const auto& [name, content] : detail::builtin_template_files()) {
    if (name.rfind(kExemplarDir, 0) == 0) pool.push_back(text::trim(content));
    else set.templates_[name] = text::ends_with(content, "\n") ? content.substr(0, content.size() - 1) : content;
  }
  set.pools_[kPoolOwner] = std::move(pool);
  return set;
}

void TemplateSet::load_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::MissingFile, dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::string content = io::read_file(p);
    if (text::ends_with(content, "\n")) content.pop_back();
    templates_[p.stem().string()] = std::move(content);
  }
  const fs::path ex = dir / "exemplars";
  if (fs::is_directory(ex)) {
    std::vector<fs::path> exemplar_files;
    for (const auto& e : fs::directory_iterator(ex)) {
      if (e.is_regular_file()) exemplar_files.push_back(e.path());
    }
    std::sort(exemplar_files.begin(), exemplar_files.end());
    std::vector<std::string> pool;
    for (const auto& p : exemplar_files) pool.push_back(text::trim(io::read_file(p)));
    if (!pool.empty()) pools_[kPoolOwner] = std::move(pool);
  }
}

void TemplateSet::set(const std::string& id, std::string text) { templates_[id] = std::move(text); }

void TemplateSet::set_exemplar_pool(const std::string& id, std::vector<std::string> pool) {
  pools_[id] = std::move(pool);
}

const std::string& TemplateSet::raw(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) fail(ErrorCode::UnknownTemplate, id);
  return it->second;
}

const std::vector<std::string>& TemplateSet::exemplar_pool(const std::string& id) const {
  static const std::vector<std::string> empty;
  auto it = pools_.find(id);
  return it == pools_.end() ? empty : it->second;
}

std::string TemplateSet::render(const std::string& id, const TemplateVars& vars, Rng* exemplar_rng) const {
  const std::string& tpl = raw(id);
  std::string exemplar;
  bool have_exemplar = false;
  const auto& pool = exemplar_pool(id);
  if (!pool.empty() && !vars.count("exemplar")) {
    exemplar = pool[exemplar_rng ? exemplar_rng->index(pool.size()) : 0];
    have_exemplar = true;
  }
  std::string out;
  out.reserve(tpl.size() + 256);
  scan(
      tpl, [&](std::string_view t) { out.append(t); },
      [&](const std::string& name) {
        if (auto it = vars.find(name); it != vars.end()) {
          out += it->second;
        } else if (name == "exemplar" && have_exemplar) {
          out += exemplar;
        } else {
          fail(ErrorCode::UnboundPlaceholder, name);
        }
      });
  return out;
}

std::vector<std::string> placeholders(const std::string& tpl) {
  std::vector<std::string> out;
  scan(
      tpl, [](std::string_view) {},
      [&](const std::string& name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
      });
  return out;
}

}  // namespace orbit
