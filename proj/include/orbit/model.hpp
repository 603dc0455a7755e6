#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace orbit {

inline constexpr std::string_view kRecordVersion = "orbit/1";
inline constexpr std::string_view kManualImportStage = "manual-import";

enum class Domain {
  TvShowsMovies,
  ScienceTechnology,
  Art,
  History,
  Sports,
  Music,
  VideoGames,
  Geography,
  Politics,
  Medicine,
  Finance,
  Law,
  Puzzles,
  Mathematics,
  Code,
};

inline constexpr std::size_t kDomainCount = 15;
const std::array<Domain, kDomainCount>& all_domains();
std::string_view to_string(Domain d);
/// Exact, case-preserving match against the 15 display names.
std::optional<Domain> parse_domain(std::string_view name);

struct Seed {
  Domain domain = Domain::TvShowsMovies;
  std::string category;
  std::string page_title;
  std::optional<std::int64_t> page_id;

  bool operator==(const Seed&) const = default;
};

/// Stable key for (domain, category, page_title).
std::string seed_key(const Seed& s);

struct ChecklistItem {
  std::string text;
  std::vector<int> cites;

  bool operator==(const ChecklistItem&) const = default;
};

struct EvidenceRef {
  int index = 0;
  std::string url;

  bool operator==(const EvidenceRef&) const = default;
};

struct CandidatePair {
  std::string id;
  Seed seed;
  std::string question;
  std::string answer;
  std::vector<ChecklistItem> checklist;
  std::vector<EvidenceRef> evidence;
  std::string raw_output;
  std::string generator_model;  // model id of the profile that produced it

  bool operator==(const CandidatePair&) const = default;
};

/// 16 hex chars of sha256(page_title, question).
std::string make_pair_id(std::string_view page_title, std::string_view question);

enum class SelfVerdict { FullyVerified, PartiallyVerified, Incorrect };
std::string_view to_string(SelfVerdict v);
std::optional<SelfVerdict> parse_self_verdict(std::string_view s);

struct SelfVerification {
  std::string report;
  std::optional<SelfVerdict> verdict;  // empty until classified
  std::optional<std::string> revised_answer;
  std::vector<std::string> cited_urls;

  bool operator==(const SelfVerification&) const = default;
};

enum class JudgeVerdict { Correct, Incorrect };
std::string_view to_string(JudgeVerdict v);

struct JudgeResult {
  int round = 1;
  std::string predicted_answer;
  JudgeVerdict verdict = JudgeVerdict::Incorrect;
  std::string rationale;

  bool operator==(const JudgeResult&) const = default;
};

struct Provenance {
  std::string generator_model;
  std::string created_at;  // UTC, format_utc()
  std::string stage;
  std::optional<std::string> original_answer;  // set when a revised answer was adopted
  std::optional<std::string> annotator;        // manual imports

  bool operator==(const Provenance&) const = default;
};

struct TrainingExample {
  std::string id;
  std::optional<Seed> seed;  // absent only for manual imports
  std::string question;
  std::string answer;
  std::vector<ChecklistItem> checklist;
  std::vector<EvidenceRef> evidence;
  std::optional<std::string> raw_output;
  SelfVerification self_verification;
  std::vector<JudgeResult> external;
  Provenance provenance;

  bool operator==(const TrainingExample&) const = default;
};

TrainingExample to_example(const CandidatePair& pair);

struct Violation {
  std::string field;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};
std::string describe(const Violation& v);

/// Errors only; an empty result means every record invariant holds.
std::vector<Violation> validate_example(const TrainingExample& record);
/// Non-fatal findings, e.g. an answer longer than `answer_token_cap` tokens.
std::vector<Violation> example_warnings(const TrainingExample& record, std::size_t answer_token_cap = 16);
std::vector<Violation> validate_candidate(const CandidatePair& pair);

// JSONL persistence. Field order is fixed; parse raises
// Error(MalformedJson) or Error(SchemaViolation, field).
std::string render_record(const TrainingExample& record);
TrainingExample parse_record(std::string_view line);

std::string render_candidate(const CandidatePair& pair);
CandidatePair parse_candidate(std::string_view line);

std::string render_seed(const Seed& seed);
Seed parse_seed(std::string_view line);

// Building blocks shared by other record kinds.
nlohmann::ordered_json seed_to_json(const Seed& s);
Seed seed_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::ordered_json example_to_json(const TrainingExample& r);
TrainingExample example_from_json(const nlohmann::json& j);
nlohmann::json parse_json_line(std::string_view line);

}  // namespace orbit
