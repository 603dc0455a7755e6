#include "orbit/datastats.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unistd.h>
#include <unordered_set>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/parallel.hpp"
#include "orbit/stage_io.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

namespace detail {
const std::string& public_suffix_list();
}

std::vector<std::size_t> WhitespaceTokenizer::count_batch(const std::vector<std::string>& texts) const {
  std::vector<std::size_t> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(text::whitespace_tokens(t));
  return out;
}

ExecTokenizer::ExecTokenizer(std::string command, std::string label)
    : command_(std::move(command)), label_(std::move(label)) {}

std::vector<std::size_t> ExecTokenizer::count_batch(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  static std::atomic<unsigned> counter{0};
  const auto input = std::filesystem::temp_directory_path() /
                     ("orbit-tok-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".jsonl");
  {
    std::string body;
    for (const auto& t : texts)
      body += nlohmann::json(t).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
    io::write_file(input, body);
  }
  const std::string cmd = command_ + " < '" + input.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(input);
    fail(ErrorCode::IoError, "tokenizer: cannot start " + command_);
  }
  std::string output;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::filesystem::remove(input);
  if (status != 0) fail(ErrorCode::IoError, "tokenizer exited with status " + std::to_string(status));
  std::vector<std::size_t> out;
  for (const auto& line : text::split_lines(output)) {
    const auto t = text::trim(line);
    if (t.empty()) continue;
    try {
      out.push_back(static_cast<std::size_t>(std::stoull(t)));
    } catch (const std::exception&) {
      fail(ErrorCode::IoError, "tokenizer output: " + t);
    }
  }
  if (out.size() != texts.size())
    fail(ErrorCode::IoError, "tokenizer returned " + std::to_string(out.size()) + " counts for " +
                                 std::to_string(texts.size()) + " texts");
  return out;
}

std::unique_ptr<Tokenizer> make_tokenizer(const std::string& spec) {
  if (spec.empty() || spec == "approx" || spec == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  if (spec.rfind("exec:", 0) == 0 && spec.size() > 5) return std::make_unique<ExecTokenizer>(spec.substr(5), spec.substr(5));
  fail(ErrorCode::ConfigError, "tokenizer: " + spec);
}

namespace {

struct SuffixRules {
  std::unordered_set<std::string> exact, wildcard, exception;
};

const SuffixRules& suffix_rules() {
  static const SuffixRules rules = [] {
    SuffixRules r;
    for (const auto& raw : text::split_lines(detail::public_suffix_list())) {
      const std::string line = text::trim(raw);
      if (line.empty() || line.rfind("//", 0) == 0) continue;
      const std::string rule = text::to_lower(line.substr(0, line.find_first_of(" \t")));
      if (rule.rfind("!", 0) == 0) {
        r.exception.insert(rule.substr(1));
      } else if (rule.rfind("*.", 0) == 0) {
        r.wildcard.insert(rule.substr(2));
      } else {
        r.exact.insert(rule);
      }
    }
    return r;
  }();
  return rules;
}

bool is_ip_literal(std::string_view host) {
  if (host.find(':') != std::string_view::npos) return true;
  return !host.empty() && std::all_of(host.begin(), host.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  });
}

std::string suffix_from(const std::vector<std::string>& labels, std::size_t i) {
  std::string s;
  for (std::size_t k = i; k < labels.size(); ++k) {
    if (k > i) s += '.';
    s += labels[k];
  }
  return s;
}

}  // namespace

std::string registrable_domain(std::string_view host_in) {
  std::string host = text::to_lower(text::trim(host_in));
  while (!host.empty() && host.back() == '.') host.pop_back();
  if (host.empty() || is_ip_literal(host)) return host;
  const auto labels = text::split(host, '.');
  if (labels.size() < 2) return host;
  const auto& rules = suffix_rules();
  const std::size_t n = labels.size();
  std::size_t suffix_labels = 1;  // implicit "*" rule
  for (std::size_t i = 0; i < n; ++i) {
    const std::string cand = suffix_from(labels, i);
    if (rules.exception.count(cand)) {
      suffix_labels = n - i - 1;
      break;
    }
    if (rules.exact.count(cand)) suffix_labels = std::max(suffix_labels, n - i);
    if (i > 0 && rules.wildcard.count(cand)) suffix_labels = std::max(suffix_labels, n - i + 1);
  }
  if (suffix_labels >= n) return host;
  return suffix_from(labels, n - suffix_labels - 1);
}

std::string classify_url(std::string_view url) {
  const auto u = parse_http_url(text::trim(url));
  if (!u) fail(ErrorCode::InvalidUrl, std::string(url));
  const std::string domain = registrable_domain(u->host);
  static const std::map<std::string, std::string, std::less<>> display = {
      {"wikipedia.org", "Wikipedia"},
      {"nih.gov", "NIH"},
      {"sciencedirect.com", "ScienceDirect"},
      {"britannica.com", "Britannica"},
  };
  if (const auto it = display.find(domain); it != display.end()) return it->second;
  return domain;
}

bool is_wiki_url(std::string_view url) {
  const auto u = parse_http_url(text::trim(url));
  if (!u) return false;
  std::string host = u->host;
  while (!host.empty() && host.back() == '.') host.pop_back();
  return host == "wikipedia.org" || text::ends_with(host, ".wikipedia.org");
}

Histogram make_histogram(const std::map<std::string, std::size_t>& counts, double others_share) {
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  Histogram out;
  std::size_t others = 0;
  for (const auto& [label, c] : counts) {
    if (others_share > 0 && static_cast<double>(c) < others_share * static_cast<double>(total)) {
      others += c;
    } else {
      out.emplace_back(label, c);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (others) out.emplace_back(std::string(kOthersLabel), others);
  return out;
}

namespace {

struct Tally {
  std::size_t n = 0;
  std::size_t question_tokens = 0, answer_tokens = 0, steps = 0, urls = 0, wiki = 0;
  std::map<std::string, std::size_t> domains, sources;

  void merge(const Tally& o) {
    n += o.n;
    question_tokens += o.question_tokens;
    answer_tokens += o.answer_tokens;
    steps += o.steps;
    urls += o.urls;
    wiki += o.wiki;
    for (const auto& [k, v] : o.domains) domains[k] += v;
    for (const auto& [k, v] : o.sources) sources[k] += v;
  }
};

std::string domain_label(const TrainingExample& r) {
  return r.seed ? std::string(to_string(r.seed->domain)) : std::string("Manual");
}

Tally tally_range(const std::vector<TrainingExample>& records, std::size_t begin, std::size_t end,
                  const Tokenizer& tokenizer) {
  Tally t;
  std::vector<std::string> questions, answers;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& r = records[i];
    questions.push_back(r.question);
    answers.push_back(r.answer);
    ++t.n;
    t.steps += r.checklist.size();
    t.urls += r.evidence.size();
    ++t.domains[domain_label(r)];
    for (const auto& ev : r.evidence) {
      if (is_wiki_url(ev.url)) ++t.wiki;
      std::string source;
      try {
        source = classify_url(ev.url);
      } catch (const Error&) {
        source = "(invalid)";
      }
      ++t.sources[source];
    }
  }
  for (auto c : tokenizer.count_batch(questions)) t.question_tokens += c;
  for (auto c : tokenizer.count_batch(answers)) t.answer_tokens += c;
  return t;
}

StatsReport finish(const Tally& t, const Tokenizer& tokenizer) {
  StatsReport r;
  r.n_pairs = t.n;
  r.tokenizer = tokenizer.name();
  r.tokenizer_approx = tokenizer.approximate();
  if (t.n) {
    const double n = static_cast<double>(t.n);
    r.avg_question_tokens = static_cast<double>(t.question_tokens) / n;
    r.avg_answer_tokens = static_cast<double>(t.answer_tokens) / n;
    r.avg_reasoning_steps = static_cast<double>(t.steps) / n;
    r.avg_verification_urls = static_cast<double>(t.urls) / n;
    r.avg_wiki_urls = static_cast<double>(t.wiki) / n;
    r.avg_nonwiki_urls = static_cast<double>(t.urls - t.wiki) / n;
  }
  r.domain_histogram = make_histogram(t.domains);
  r.url_source_histogram = make_histogram(t.sources, kOthersShare);
  return r;
}

}  // namespace

StatsReport compute_stats(const std::vector<TrainingExample>& records, const Tokenizer& tokenizer, int workers) {
  if (workers <= 0) workers = default_workers();
  const std::size_t chunks = std::min<std::size_t>(records.size(), static_cast<std::size_t>(workers) * 4);
  if (chunks <= 1) return compute_stats_serial(records, tokenizer);
  std::vector<Tally> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = records.size() * c / chunks, end = records.size() * (c + 1) / chunks;
    partial[c] = tally_range(records, begin, end, tokenizer);
  });
  Tally total;
  for (const auto& p : partial) total.merge(p);
  return finish(total, tokenizer);
}

StatsReport compute_stats_serial(const std::vector<TrainingExample>& records, const Tokenizer& tokenizer) {
  return finish(tally_range(records, 0, records.size(), tokenizer), tokenizer);
}

namespace {

[[noreturn]] void row_error(std::size_t row, std::string_view field) {
  fail(ErrorCode::SchemaViolation, "row " + std::to_string(row) + ": " + std::string(field));
}

TrainingExample loose_record(const nlohmann::json& j, std::size_t row) {
  if (!j.is_object()) row_error(row, "object");
  TrainingExample r;
  if (!j.contains("question") || !j["question"].is_string()) row_error(row, "question");
  r.question = j["question"].get<std::string>();
  if (const auto it = j.find("answer"); it != j.end() && it->is_string()) r.answer = it->get<std::string>();
  if (const auto it = j.find("id"); it != j.end() && it->is_string()) r.id = it->get<std::string>();
  bool have_steps = false;
  for (const char* key : {"checklist", "reasoning_steps", "steps"}) {
    const auto it = j.find(key);
    if (it == j.end()) continue;
    have_steps = true;
    if (it->is_array()) {
      for (const auto& item : *it) {
        ChecklistItem c;
        if (item.is_string()) c.text = item.get<std::string>();
        else if (item.is_object() && item.contains("text") && item["text"].is_string()) c.text = item["text"];
        r.checklist.push_back(std::move(c));
      }
    } else if (it->is_number_unsigned()) {
      r.checklist.resize(it->get<std::size_t>());
    } else {
      row_error(row, key);
    }
    break;
  }
  if (!have_steps) row_error(row, "checklist");
  for (const char* key : {"evidence", "verification_urls", "urls"}) {
    const auto it = j.find(key);
    if (it == j.end()) continue;
    if (!it->is_array()) row_error(row, key);
    int index = 0;
    for (const auto& item : *it) {
      EvidenceRef ev{++index, {}};
      if (item.is_string()) ev.url = item.get<std::string>();
      else if (item.is_object() && item.contains("url") && item["url"].is_string()) ev.url = item["url"];
      else row_error(row, key);
      r.evidence.push_back(std::move(ev));
    }
    break;
  }
  if (const auto it = j.find("domain"); it != j.end() && it->is_string()) {
    if (const auto d = parse_domain(it->get<std::string>())) r.seed = Seed{*d, {}, {}, {}};
  }
  return r;
}

}  // namespace

std::vector<TrainingExample> load_stats_records(const std::filesystem::path& path) {
  std::vector<TrainingExample> out;
  std::size_t row = 0;
  for (const auto& line : io::read_lines(path)) {
    ++row;
    try {
      out.push_back(parse_record(line));
      continue;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedJson) row_error(row, "json");
    }
    out.push_back(loose_record(nlohmann::json::parse(line), row));
  }
  return out;
}

const std::array<std::string_view, kAnswerTypeCount>& answer_types() {
  static const std::array<std::string_view, kAnswerTypeCount> types = {
      "Temporal",
      "Numeric / Quantitative",
      "Geographic Location",
      "Person",
      "Organization / Institution",
      "Event / Historical Phenomenon",
      "Scientific / Technical Concept",
      "Named Artifact / System",
      "Property / Relationship",
  };
  return types;
}

namespace {

std::string strip_markup(std::string_view s) {
  std::string out;
  for (char c : s)
    if (c != '*' && c != '`' && c != '_') out.push_back(c);
  return text::trim(out);
}

// "Numeric/Quantitative" and "numeric / quantitative" compare equal.
std::string type_key(std::string_view s) {
  std::string out;
  for (char c : text::to_lower(s))
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

}  // namespace

std::string parse_answer_type(std::string_view response) {
  const auto lines = text::split_lines(response);
  std::size_t last = lines.size();
  while (last > 0 && strip_markup(lines[last - 1]).empty()) --last;
  if (last > 0) {
    const std::string line = strip_markup(lines[last - 1]);
    if (text::istarts_with(line, "type:")) {
      std::string name = text::trim(line.substr(5));
      while (!name.empty() && name.back() == '.') name.pop_back();
      for (const auto t : answer_types())
        if (type_key(t) == type_key(name)) return std::string(t);
    }
  }
  fail(ErrorCode::UnparseableType, text::utf8_truncate(response, 200));
}

int parse_subquestion_list(std::string_view response) {
  int expected = 1;
  for (const auto& raw : text::split_lines(response)) {
    const std::string line = strip_markup(raw);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i > 4 || i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;
    const int number = std::stoi(line.substr(0, i));
    if (text::trim(line.substr(i + 1)).empty()) continue;
    if (number != expected) fail(ErrorCode::UnparseableList, text::utf8_truncate(response, 200));
    ++expected;
  }
  if (expected == 1) fail(ErrorCode::UnparseableList, text::utf8_truncate(response, 200));
  return expected - 1;
}

std::string classify_answer_type(const TrainingExample& item, Gateway& gateway, const TemplateSet& templates,
                                 const LabelConfig& config) {
  ChatRequest req;
  req.user = templates.render("answer_type", {{"question", item.question}, {"answer", item.answer}});
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  try {
    return parse_answer_type(gateway.complete(config.answer_type_profile, req).text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableType) throw;
    log::warn("stats", item.id, "re-asking for a type line");
    req.user += "\n" + templates.render("label_reask", {});
    return parse_answer_type(gateway.complete(config.answer_type_profile, req).text);
  }
}

int decompose_complexity(const std::string& question, Gateway& gateway, const TemplateSet& templates,
                         const LabelConfig& config) {
  ChatRequest req;
  req.user = templates.render("decompose", {{"question", question}});
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  return parse_subquestion_list(gateway.complete(config.decompose_profile, req).text);
}

LabelSummary label_records(const std::vector<TrainingExample>& records, Gateway& gateway, const TemplateSet& templates,
                           const LabelConfig& config, const std::filesystem::path& dead_letters) {
  struct Outcome {
    std::optional<std::string> type;
    std::optional<int> hops;
    std::vector<std::string> failures;
  };
  LabelSummary summary;
  ChunkedRunner runner(config.workers);
  runner.run<Outcome>(
      records.size(),
      [&](std::size_t i) {
        Outcome o;
        try {
          o.type = classify_answer_type(records[i], gateway, templates, config);
        } catch (const Error& e) {
          o.failures.push_back("answer_type: " + std::string(to_string(e.code())));
        }
        try {
          o.hops = decompose_complexity(records[i].question, gateway, templates, config);
        } catch (const Error& e) {
          o.failures.push_back("decompose: " + std::string(to_string(e.code())));
        }
        return o;
      },
      [&](std::size_t i, Outcome& o) {
        if (o.type) ++summary.answer_types[*o.type];
        if (o.hops) ++summary.hops[std::to_string(*o.hops)];
        if (o.failures.empty()) return;
        ++summary.dead_lettered;
        if (!dead_letters.empty())
          io::append_lines(dead_letters, {render_dead_letter("stats-labels", example_to_json(records[i]),
                                                             text::join(o.failures, "; "))});
      });
  return summary;
}

void attach_labels(StatsReport& report, const LabelSummary& labels) {
  report.answer_type_histogram = make_histogram(labels.answer_types);
  Histogram hops(labels.hops.begin(), labels.hops.end());
  std::sort(hops.begin(), hops.end(), [](const auto& a, const auto& b) { return std::stoi(a.first) < std::stoi(b.first); });
  report.complexity_histogram = hops;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

nlohmann::ordered_json hist_json(const Histogram& h) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [label, count] : h) j.push_back({{"label", label}, {"count", count}});
  return j;
}

void write_csv(const std::filesystem::path& path, const std::optional<Histogram>& h) {
  std::string out = "label,count\n";
  if (h)
    for (const auto& [label, count] : *h) out += text::csv_escape(label) + "," + std::to_string(count) + "\n";
  io::write_file(path, out);
}

}  // namespace

nlohmann::ordered_json stats_to_json(const StatsReport& r) {
  nlohmann::ordered_json j;
  j["n_pairs"] = r.n_pairs;
  j["tokenizer"] = r.tokenizer;
  j["tokenizer_approx"] = r.tokenizer_approx;
  j["avg_question_tokens"] = opt(r.avg_question_tokens);
  j["avg_answer_tokens"] = opt(r.avg_answer_tokens);
  j["avg_reasoning_steps"] = opt(r.avg_reasoning_steps);
  j["avg_verification_urls"] = opt(r.avg_verification_urls);
  j["avg_wiki_urls"] = opt(r.avg_wiki_urls);
  j["avg_nonwiki_urls"] = opt(r.avg_nonwiki_urls);
  j["domain_histogram"] = hist_json(r.domain_histogram);
  j["url_source_histogram"] = hist_json(r.url_source_histogram);
  j["answer_type_histogram"] = r.answer_type_histogram ? hist_json(*r.answer_type_histogram) : nlohmann::ordered_json();
  j["complexity_histogram"] = r.complexity_histogram ? hist_json(*r.complexity_histogram) : nlohmann::ordered_json();
  return j;
}

void emit_report(const StatsReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, out_dir.string() + ": " + ec.message());
  io::write_file(out_dir / "stats.json", stats_to_json(report).dump(2) + "\n");
  write_csv(out_dir / "domains.csv", report.domain_histogram);
  write_csv(out_dir / "url_sources.csv", report.url_source_histogram);
  write_csv(out_dir / "answer_types.csv", report.answer_type_histogram);
  write_csv(out_dir / "complexity.csv", report.complexity_histogram);
}

Histogram load_histogram_csv(const std::filesystem::path& path) {
  const auto rows = text::parse_csv(io::read_file(path));
  if (rows.empty() || rows.front() != std::vector<std::string>{"label", "count"})
    fail(ErrorCode::SchemaViolation, path.string() + ": header");
  Histogram h;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) fail(ErrorCode::SchemaViolation, "row " + std::to_string(i));
    h.emplace_back(rows[i][0], static_cast<std::size_t>(std::stoull(rows[i][1])));
  }
  return h;
}

}  // namespace orbit
