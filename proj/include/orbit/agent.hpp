#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orbit/llm.hpp"
#include "orbit/metasearch.hpp"
#include "orbit/templates.hpp"

namespace orbit {

inline constexpr std::string_view kTrajectoryVersion = "orbit-traj/1";
inline constexpr std::string_view kNoResults = "No results found.";
inline constexpr std::string_view kObservationTruncated = "[truncated]";
inline constexpr std::string_view kSearchUnavailable = "Search unavailable.";

enum class DuplicateQueryPolicy { Warn, Block };

struct AgentConfig {
  std::string profile = "agent";
  int max_turns = 5;  // search actions
  int top_k = 5;
  std::size_t max_observation_chars = 4096;
  int max_response_tokens = 8192;
  int max_prompt_tokens = 2048;
  DuplicateQueryPolicy duplicate_query_policy = DuplicateQueryPolicy::Block;
  double temperature = 0.0;
  /// Observation size measure; code points unless a tokenizer is plugged in.
  std::function<std::size_t(std::string_view)> measure;
};

/// Throws Error(ConfigError) when a numeric field is not positive.
void validate_agent_config(const AgentConfig& config);

enum class ActionKind { Think, Search, Answer, Malformed };
std::string_view to_string(ActionKind k);

struct AgentAction {
  ActionKind kind = ActionKind::Malformed;
  std::string text;  // trimmed tag body; the raw emission for Malformed

  bool operator==(const AgentAction&) const = default;
};

/// Think blocks followed by the single effective action: the first complete
/// search or answer pair, or Malformed when there is none.
std::vector<AgentAction> parse_action(std::string_view model_text);

/// "<information>Doc i (Title: "..."): snippet ...</information>", cut at a
/// line boundary so the body stays within `budget`.
std::string format_observation(const std::vector<SearchResult>& results, std::size_t budget,
                               const std::function<std::size_t(std::string_view)>& measure = {});

/// Lowercase, ASCII punctuation removed, articles dropped, whitespace collapsed.
std::string normalize_answer(std::string_view s);
int score_em(std::string_view predicted, const std::vector<std::string>& golds);

enum class Termination { Answered, TurnBudget, Malformed };
std::string_view to_string(Termination t);

struct Turn {
  std::string model_text;             // the emission up to its effective action
  std::vector<AgentAction> actions;   // parse_action(model_text)
  std::optional<std::string> feedback;  // observation, or the format reminder after a malformed turn

  const AgentAction& action() const { return actions.back(); }
  bool operator==(const Turn&) const = default;
};

struct Trajectory {
  std::string id;
  std::string question;
  std::vector<std::string> golds;
  std::string prompt;
  std::vector<Turn> turns;
  std::optional<std::string> final_answer;
  int reward = 0;
  Termination termination = Termination::TurnBudget;

  std::size_t search_count() const;
  /// prompt + every model_text and feedback, in order: the model's context.
  std::string transcript() const;
  bool operator==(const Trajectory&) const = default;
};

/// Runs one question to an answer, the search budget or a second protocol
/// violation. Search outages become observations; ReplayMiss and provider
/// errors propagate.
Trajectory run_trajectory(const std::string& id, const std::string& question, const std::vector<std::string>& golds,
                          Gateway& gateway, Searcher& searcher, const TemplateSet& templates,
                          const AgentConfig& config);

/// One "orbit-traj/1" JSONL line: the trajectory plus the transcript text
/// and its prompt / model_text / observation segments as byte ranges.
std::string render_trajectory(const Trajectory& t);
Trajectory parse_trajectory(std::string_view line);
void export_trajectories(const std::vector<Trajectory>& trajectories, const std::filesystem::path& path);
std::vector<Trajectory> import_trajectories(const std::filesystem::path& path);

}  // namespace orbit
