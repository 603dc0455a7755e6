#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "orbit/clock.hpp"
#include "orbit/llm.hpp"
#include "orbit/model.hpp"
#include "orbit/templates.hpp"

namespace orbit {

inline constexpr std::string_view kSelfVerifiedStage = "self-verified";

struct SelfVerifyPolicy {
  std::string verifier_profile = "verifier";
  std::string classifier_profile = "classifier";
  std::set<SelfVerdict> accept{SelfVerdict::FullyVerified};
  bool adopt_revised_answer = true;
  double verifier_temperature = 1.0;
  double classifier_temperature = 0.0;
  int max_tokens = 8192;
  int workers = 1;
};

/// Last "revised answer: ..." statement in a report (case-insensitive,
/// markdown emphasis tolerated). Placeholders such as "none" or "n/a" count
/// as no revision.
std::optional<std::string> extract_revised_answer(std::string_view report);

/// Verdict from the last line carrying "VERDICT:". Throws
/// Error(UnparseableVerdict, raw) when absent or not FULL/PARTIAL/INCORRECT.
SelfVerdict parse_classifier_verdict(std::string_view response);

/// Report, revised answer and cited URLs; the verdict stays empty.
/// Throws Error(EmptyReport); provider errors propagate.
SelfVerification run_self_verification(const CandidatePair& pair, Gateway& gateway, const TemplateSet& templates,
                                       const SelfVerifyPolicy& policy);

SelfVerdict classify_report(const CandidatePair& pair, const std::string& report, Gateway& gateway,
                            const TemplateSet& templates, const SelfVerifyPolicy& policy);

/// Applies the accept set and, for accepted pairs, the revised answer.
/// Returns nullopt when the verdict is not accepted.
std::optional<TrainingExample> accept_self_verified(const CandidatePair& pair, SelfVerification sv,
                                                    const SelfVerifyPolicy& policy, const std::string& created_at);

struct Stage3Paths {
  std::filesystem::path verified;
  std::filesystem::path rejected;
  std::filesystem::path dead_letters;
};

struct Stage3Summary {
  std::size_t input = 0;
  std::size_t skipped = 0;
  std::size_t kept = 0;  // over the whole input, including earlier runs
  std::size_t rejected = 0;
  std::size_t dead_lettered = 0;
  std::size_t full = 0, partial = 0, incorrect = 0;  // this run's verdicts
  std::optional<double> retention;                   // kept / input; empty input -> nullopt
};

Stage3Summary run_stage3(const std::vector<CandidatePair>& candidates, Gateway& gateway, const TemplateSet& templates,
                         const SelfVerifyPolicy& policy, const Stage3Paths& paths, const Clock& clock);

/// {"version","reason","record"} line for records filtered out by a stage.
std::string render_rejection(std::string_view reason, const TrainingExample& record);

}  // namespace orbit
