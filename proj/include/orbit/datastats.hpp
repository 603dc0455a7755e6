#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "orbit/llm.hpp"
#include "orbit/model.hpp"
#include "orbit/templates.hpp"

namespace orbit {

/// Token counting backend for the token averages.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  /// Label written into reports.
  virtual std::string name() const = 0;
  virtual bool approximate() const = 0;
  virtual std::vector<std::size_t> count_batch(const std::vector<std::string>& texts) const = 0;
};

/// Whitespace-separated word count, labelled "whitespace (approx)".
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "whitespace (approx)"; }
  bool approximate() const override { return true; }
  std::vector<std::size_t> count_batch(const std::vector<std::string>& texts) const override;
};

/// Runs `command` once per batch: one JSON string per line on stdin, one
/// integer per line expected on stdout (see tools/tiktoken_count.py).
class ExecTokenizer final : public Tokenizer {
 public:
  ExecTokenizer(std::string command, std::string label);
  std::string name() const override { return label_; }
  bool approximate() const override { return false; }
  std::vector<std::size_t> count_batch(const std::vector<std::string>& texts) const override;

 private:
  std::string command_;
  std::string label_;
};

/// "approx" | "whitespace" -> WhitespaceTokenizer; "exec:<command>" ->
/// ExecTokenizer. Error(ConfigError) otherwise.
std::unique_ptr<Tokenizer> make_tokenizer(const std::string& spec);

/// Registrable domain under the ICANN public suffix rules (lowercase, no
/// trailing dot). IP literals and single-label hosts map to themselves.
std::string registrable_domain(std::string_view host);

/// Display name for well-known sources, otherwise the registrable domain.
/// Error(InvalidUrl) for anything that is not an absolute http(s) URL.
std::string classify_url(std::string_view url);
bool is_wiki_url(std::string_view url);

using Histogram = std::vector<std::pair<std::string, std::size_t>>;

inline constexpr double kOthersShare = 0.005;
inline constexpr std::string_view kOthersLabel = "Others";

/// Count-descending, label-ascending. Labels below `others_share` of the
/// total collapse into one trailing "Others" entry.
Histogram make_histogram(const std::map<std::string, std::size_t>& counts, double others_share = 0);

struct StatsReport {
  std::size_t n_pairs = 0;
  std::string tokenizer;
  bool tokenizer_approx = true;
  std::optional<double> avg_question_tokens;
  std::optional<double> avg_answer_tokens;
  std::optional<double> avg_reasoning_steps;
  std::optional<double> avg_verification_urls;
  std::optional<double> avg_wiki_urls;
  std::optional<double> avg_nonwiki_urls;
  Histogram domain_histogram;
  Histogram url_source_histogram;
  std::optional<Histogram> answer_type_histogram;
  std::optional<Histogram> complexity_histogram;

  bool operator==(const StatsReport&) const = default;
};

/// Per-record folds over OpenMP threads; `workers` <= 1 runs serially.
StatsReport compute_stats(const std::vector<TrainingExample>& records, const Tokenizer& tokenizer, int workers = 0);
/// Single-threaded reference used by tests and the benchmark.
StatsReport compute_stats_serial(const std::vector<TrainingExample>& records, const Tokenizer& tokenizer);

/// Loads full records, or looser rows {question, answer, checklist|steps,
/// evidence|urls, domain?} as shipped by public dataset dumps.
std::vector<TrainingExample> load_stats_records(const std::filesystem::path& path);

inline constexpr std::size_t kAnswerTypeCount = 9;
const std::array<std::string_view, kAnswerTypeCount>& answer_types();

/// Final "TYPE: <name>" line matched against the closed set, case-insensitive.
/// Error(UnparseableType, raw) otherwise.
std::string parse_answer_type(std::string_view response);
/// Numbered-list length; numbering must run 1, 2, ... Error(UnparseableList).
int parse_subquestion_list(std::string_view response);

struct LabelConfig {
  std::string answer_type_profile = "labeler";
  std::string decompose_profile = "decomposer";
  double temperature = 0.0;
  int max_tokens = 2048;
  int workers = 1;
};

/// One re-ask on an unparseable reply, then the error propagates.
std::string classify_answer_type(const TrainingExample& item, Gateway& gateway, const TemplateSet& templates,
                                 const LabelConfig& config);
/// No re-ask: Error(UnparseableList) propagates.
int decompose_complexity(const std::string& question, Gateway& gateway, const TemplateSet& templates,
                         const LabelConfig& config);

struct LabelSummary {
  std::map<std::string, std::size_t> answer_types;
  std::map<std::string, std::size_t> hops;  // "1", "2", ...
  std::size_t dead_lettered = 0;
};

/// Labels every record; failures go to `dead_letters` (when non-empty).
LabelSummary label_records(const std::vector<TrainingExample>& records, Gateway& gateway, const TemplateSet& templates,
                           const LabelConfig& config, const std::filesystem::path& dead_letters);
void attach_labels(StatsReport& report, const LabelSummary& labels);

nlohmann::ordered_json stats_to_json(const StatsReport& report);

/// stats.json plus domains.csv, url_sources.csv, answer_types.csv and
/// complexity.csv ("label,count"; header only when the histogram is absent).
void emit_report(const StatsReport& report, const std::filesystem::path& out_dir);
Histogram load_histogram_csv(const std::filesystem::path& path);

}  // namespace orbit
