#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orbit/llm.hpp"
#include "orbit/model.hpp"
#include "orbit/templates.hpp"

namespace orbit {

/// Parses the generator's XML-tagged answer. Text around the (last)
/// <output> block is ignored. The result has no seed or id yet.
/// Throws Error(NoOutputBlock), Error(MissingSection, name),
/// Error(UnparseableCite, item number) or Error(UnparseableEvidenceEntry, k).
CandidatePair parse_generation_output(std::string_view text);

/// Inverse of parse_generation_output for the fields it extracts.
std::string render_generation_output(const CandidatePair& pair);

enum class DiscardReason { ParseFailure, MissingSection, TooFewEvidence, AnswerEqualsSeed };
std::string_view to_string(DiscardReason r);

struct GenerationPolicy {
  std::string profile = "generator";
  std::size_t min_evidence = 5;
  int max_attempts = 3;  // first try plus two regenerations
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 8192;
  std::uint64_t rng_seed = 0;
  int workers = 1;
};

struct GenerationOutcome {
  std::optional<CandidatePair> pair;
  DiscardReason reason = DiscardReason::ParseFailure;  // meaningful when !pair
  int attempts = 0;
  std::string raw;     // last provider response
  std::string detail;  // parser or gate message
};

/// Prompts, parses and gates one seed. Parse failures are retried with a
/// fresh exemplar; gate failures discard at once. Provider errors propagate.
GenerationOutcome generate_pair(const Seed& seed, Gateway& gateway, const TemplateSet& templates,
                                const GenerationPolicy& policy);

struct Stage2Paths {
  std::filesystem::path candidates;
  std::filesystem::path discards;
  std::filesystem::path dead_letters;
};

struct Stage2Summary {
  std::size_t input = 0;
  std::size_t skipped = 0;  // already processed in an earlier run
  std::size_t produced = 0;
  std::size_t discarded = 0;
  std::size_t dead_lettered = 0;
};

/// Maps generate_pair over the seeds, appending to the output files in seed
/// order. Seeds already present in the candidates or discard file are skipped.
Stage2Summary run_stage2(const std::vector<Seed>& seeds, Gateway& gateway, const TemplateSet& templates,
                         const GenerationPolicy& policy, const Stage2Paths& paths);

}  // namespace orbit
