#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "orbit/clock.hpp"
#include "orbit/llm.hpp"
#include "orbit/model.hpp"
#include "orbit/templates.hpp"
#include "orbit/webtext.hpp"

namespace orbit {

inline constexpr std::string_view kExternalVerifiedStage = "external-verified";

struct CascadeConfig {
  std::vector<std::string> round_profiles{"judge_small", "judge_large"};
  double answer_temperature = 0.0;
  double verdict_temperature = 0.0;
  int max_tokens = 8192;
  std::size_t bundle_budget = kDefaultBundleBudget;
  int workers = 1;
};

/// Rejects unknown profiles, an empty round list and any judge whose model
/// id matches one of `generator_models`. Throws Error(ConfigError).
void validate_cascade_config(const CascadeConfig& config, const Gateway& gateway,
                             const std::set<std::string>& generator_models);

/// The judge's full answer text. Throws Error(PreconditionViolation) for an
/// empty question or bundle; provider errors propagate.
std::string judge_answer(const TrainingExample& pair, const EvidenceBundle& bundle, Gateway& gateway,
                         const TemplateSet& templates, const std::string& profile, const CascadeConfig& config);

struct ParsedJudgeVerdict {
  JudgeVerdict verdict = JudgeVerdict::Incorrect;
  std::string rationale;  // text before the verdict marker
};

/// Verdict from the last "Judge:" marker (case-insensitive, markdown
/// emphasis tolerated). Throws Error(UnparseableVerdict).
ParsedJudgeVerdict parse_judge_verdict(std::string_view response);

/// Grades `predicted` against the gold answer, re-asking once when the
/// response has no parseable verdict. Throws Error(UnparseableVerdict) when
/// the re-ask fails too.
JudgeResult judge_verdict(const TrainingExample& pair, const std::string& predicted, Gateway& gateway,
                          const TemplateSet& templates, const std::string& profile, const CascadeConfig& config,
                          int round);

struct CascadeOutcome {
  std::optional<TrainingExample> accepted;
  std::vector<JudgeResult> rounds;
};

/// Round k uses round_profiles[k-1] and only runs when every earlier round
/// was judged Incorrect. Accepted records carry all rounds and the
/// external-verified stage.
CascadeOutcome run_cascade(const TrainingExample& pair, const EvidenceBundle& bundle, Gateway& gateway,
                           const TemplateSet& templates, const CascadeConfig& config, const std::string& created_at);

/// Manually verified pairs from CSV (header row) or JSONL. Required fields:
/// question, answer, annotator. Optional: evidence (whitespace-separated
/// URLs in CSV, an array in JSONL), created_at. Throws
/// Error(SchemaViolation, "row N: field").
std::vector<TrainingExample> import_manual(const std::filesystem::path& file, const Clock& clock);

struct Stage4Paths {
  std::filesystem::path accepted;
  std::filesystem::path rejected;
  std::filesystem::path dead_letters;
};

struct Stage4Summary {
  std::size_t input = 0;
  std::size_t skipped = 0;
  std::size_t accepted = 0;  // this run
  std::size_t rejected = 0;
  std::size_t dead_lettered = 0;
  std::size_t no_evidence = 0;  // rejected before judging
  std::vector<std::size_t> accepted_in_round;  // index 0 = round 1
};

/// `docs` holds live documents keyed by evidence URL. Records that already
/// appear in the accepted or rejected file are skipped.
Stage4Summary run_stage4(const std::vector<TrainingExample>& records, const std::map<std::string, WebDocument>& docs,
                         Gateway& gateway, const TemplateSet& templates, const CascadeConfig& config,
                         const Stage4Paths& paths, const Clock& clock);

}  // namespace orbit
