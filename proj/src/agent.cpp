#include "orbit/agent.hpp"

#include <cctype>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/model.hpp"
#include "orbit/text.hpp"

namespace orbit {

using nlohmann::json;
using nlohmann::ordered_json;

void validate_agent_config(const AgentConfig& c) {
  if (c.max_turns <= 0 || c.top_k <= 0 || c.max_observation_chars == 0 || c.max_response_tokens <= 0 ||
      c.max_prompt_tokens <= 0)
    fail(ErrorCode::ConfigError, "agent limits must be positive");
  if (c.profile.empty()) fail(ErrorCode::ConfigError, "agent profile is empty");
}

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Think: return "think";
    case ActionKind::Search: return "search";
    case ActionKind::Answer: return "answer";
    case ActionKind::Malformed: return "malformed";
  }
  return "malformed";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Answered: return "answered";
    case Termination::TurnBudget: return "turn_budget";
    case Termination::Malformed: return "malformed";
  }
  return "malformed";
}

namespace {

ActionKind action_kind_from(std::string_view s) {
  for (auto k : {ActionKind::Think, ActionKind::Search, ActionKind::Answer, ActionKind::Malformed})
    if (to_string(k) == s) return k;
  fail(ErrorCode::SchemaViolation, "action.kind");
}

Termination termination_from(std::string_view s) {
  for (auto t : {Termination::Answered, Termination::TurnBudget, Termination::Malformed})
    if (to_string(t) == s) return t;
  fail(ErrorCode::SchemaViolation, "termination");
}

struct Scan {
  std::vector<AgentAction> actions;
  std::size_t effective_end = std::string_view::npos;  // one past the closing tag
};

Scan scan_emission(std::string_view text) {
  static constexpr std::string_view kTags[] = {"think", "search", "answer"};
  const std::string lower = text::to_lower(text);
  Scan scan;
  std::size_t pos = 0;
  bool effective = false;
  while (pos < lower.size()) {
    // earliest opening tag from here
    std::size_t best = std::string::npos;
    std::string_view tag;
    for (auto t : kTags) {
      const auto at = lower.find("<" + std::string(t) + ">", pos);
      if (at < best) {
        best = at;
        tag = t;
      }
    }
    if (best == std::string::npos) break;
    const std::size_t body = best + tag.size() + 2;
    const std::string closer = "</" + std::string(tag) + ">";
    const auto close = lower.find(closer, body);
    if (close == std::string::npos) {
      pos = body;
      continue;
    }
    const std::string inner = text::trim(text.substr(body, close - body));
    pos = close + closer.size();
    if (tag == "think") {
      if (!effective) scan.actions.push_back({ActionKind::Think, inner});
      continue;
    }
    if (effective) {
      log::event(log::Level::debug, "agent", "", "ignoring extra action tag", {{"tag", tag}});
      continue;
    }
    if (inner.empty()) continue;  // an empty query or answer is not an action
    scan.actions.push_back({tag == "search" ? ActionKind::Search : ActionKind::Answer, inner});
    scan.effective_end = pos;
    effective = true;
  }
  if (!effective) scan.actions.push_back({ActionKind::Malformed, std::string(text)});
  return scan;
}

}  // namespace

std::vector<AgentAction> parse_action(std::string_view model_text) { return scan_emission(model_text).actions; }

std::string format_observation(const std::vector<SearchResult>& results, std::size_t budget,
                               const std::function<std::size_t(std::string_view)>& measure) {
  const auto size = [&](std::string_view s) { return measure ? measure(s) : text::utf8_length(s); };
  if (results.empty()) return "<information>" + std::string(kNoResults) + "</information>";
  std::string body;
  std::size_t used = 0;
  bool cut = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::string line = "Doc " + std::to_string(i + 1) + " (Title: \"" + results[i].title + "\"): " + results[i].snippet;
    const std::size_t cost = size(line) + (body.empty() ? 0 : 1);
    if (used + cost > budget) {
      cut = true;
      break;
    }
    if (!body.empty()) body += "\n";
    body += line;
    used += cost;
  }
  if (cut) body += (body.empty() ? "" : "\n") + std::string(kObservationTruncated);
  return "<information>" + body + "</information>";
}

namespace {

char32_t fold_case(char32_t c) {
  if (c < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(c)));
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 0x20;  // Latin-1 capitals
  return c;
}

// Word characters as a Unicode regex engine sees them, with non-ASCII
// punctuation and spacing blocks excluded.
bool is_word_char(char32_t c) {
  if (c < 0x80) return std::isalnum(static_cast<int>(c)) || c == '_';
  if (c <= 0xBF || c == 0xD7 || c == 0xF7) return false;
  if ((c >= 0x2000 && c <= 0x206F) || (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFF0F)) return false;
  return true;
}

bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::u32string chars;
  for (char32_t c : text::utf8_decode(s)) {
    c = fold_case(c);
    if (c < 0x80 && std::ispunct(static_cast<int>(c))) continue;
    chars.push_back(c);
  }
  // articles as whole words, bounded by any non-word character
  std::u32string no_articles;
  for (std::size_t i = 0; i < chars.size();) {
    if (!is_word_char(chars[i])) {
      no_articles.push_back(chars[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < chars.size() && is_word_char(chars[j])) ++j;
    const std::u32string word = chars.substr(i, j - i);
    if (word == U"a" || word == U"an" || word == U"the") no_articles.push_back(U' ');
    else no_articles += word;
    i = j;
  }
  std::u32string out;
  bool pending = false;
  for (char32_t c : no_articles) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(U' ');
    pending = false;
    out.push_back(c);
  }
  return text::utf8_encode(out);
}

int score_em(std::string_view predicted, const std::vector<std::string>& golds) {
  const std::string p = normalize_answer(predicted);
  for (const auto& g : golds)
    if (normalize_answer(g) == p) return 1;
  return 0;
}

std::size_t Trajectory::search_count() const {
  std::size_t n = 0;
  for (const auto& t : turns) n += t.action().kind == ActionKind::Search;
  return n;
}

std::string Trajectory::transcript() const {
  std::string out = prompt;
  for (const auto& t : turns) {
    out += t.model_text;
    if (t.feedback) out += *t.feedback;
  }
  return out;
}

namespace {

std::string wrap_feedback(const std::string& block) { return "\n\n" + block + "\n\n"; }

}  // namespace

Trajectory run_trajectory(const std::string& id, const std::string& question, const std::vector<std::string>& golds,
                          Gateway& gateway, Searcher& searcher, const TemplateSet& templates,
                          const AgentConfig& config) {
  validate_agent_config(config);
  Trajectory traj;
  traj.id = id;
  traj.question = question;
  traj.golds = golds;
  traj.prompt = templates.render("agent", {{"question", question}});
  if (text::whitespace_tokens(traj.prompt) > static_cast<std::size_t>(config.max_prompt_tokens))
    log::warn("agent", id, "prompt exceeds max_prompt_tokens");

  std::vector<std::string> asked;  // normalized queries already sent
  int searches = 0;
  bool reprompted = false;
  // Blocked duplicates do not consume the search budget, so cap model calls too.
  const int max_calls = 2 * config.max_turns + 2;
  for (int call = 0;; ++call) {
    if (call >= max_calls) {
      traj.termination = Termination::TurnBudget;
      break;
    }
    ChatRequest req;
    req.user = traj.transcript();
    req.temperature = config.temperature;
    req.max_tokens = config.max_response_tokens;
    const std::string emission = gateway.complete(config.profile, req).text;
    Scan scan = scan_emission(emission);
    Turn turn;
    turn.model_text = scan.effective_end == std::string_view::npos ? emission : emission.substr(0, scan.effective_end);
    turn.actions = std::move(scan.actions);
    const AgentAction action = turn.action();

    if (action.kind == ActionKind::Answer) {
      traj.final_answer = action.text;
      traj.termination = Termination::Answered;
      traj.turns.push_back(std::move(turn));
      break;
    }
    if (action.kind == ActionKind::Malformed) {
      if (reprompted) {
        traj.termination = Termination::Malformed;
        traj.turns.push_back(std::move(turn));
        break;
      }
      reprompted = true;
      turn.feedback = wrap_feedback(templates.render("malformed_reminder", {}));
      traj.turns.push_back(std::move(turn));
      continue;
    }
    // Search
    if (searches >= config.max_turns) {
      traj.termination = Termination::TurnBudget;
      break;
    }
    const std::string norm = normalize_query(action.text);
    const bool duplicate = std::find(asked.begin(), asked.end(), norm) != asked.end();
    if (duplicate && config.duplicate_query_policy == DuplicateQueryPolicy::Block) {
      turn.feedback = wrap_feedback("<information>Duplicate search: \"" + action.text +
                                    "\" was already searched. Use the earlier results or try a different query."
                                    "</information>");
      traj.turns.push_back(std::move(turn));
      continue;
    }
    if (duplicate) log::warn("agent", id, "duplicate search", {{"query", action.text}});
    asked.push_back(norm);
    ++searches;
    std::string observation;
    try {
      observation = format_observation(searcher.search(action.text, config.top_k).results,
                                       config.max_observation_chars, config.measure);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllBackendsFailed) throw;
      log::warn("agent", id, "search unavailable", {{"query", action.text}});
      observation = "<information>" + std::string(kSearchUnavailable) + "</information>";
    }
    turn.feedback = wrap_feedback(observation);
    traj.turns.push_back(std::move(turn));
  }
  traj.reward = traj.termination == Termination::Answered ? score_em(*traj.final_answer, golds) : 0;
  return traj;
}

std::string render_trajectory(const Trajectory& t) {
  ordered_json j;
  j["version"] = kTrajectoryVersion;
  j["id"] = t.id;
  j["question"] = t.question;
  j["golds"] = t.golds;
  j["termination"] = to_string(t.termination);
  j["final_answer"] = t.final_answer ? json(*t.final_answer) : json(nullptr);
  j["reward"] = t.reward;
  j["search_count"] = t.search_count();
  ordered_json turns = ordered_json::array();
  ordered_json segments = ordered_json::array();
  std::string text = t.prompt;
  segments.push_back({{"kind", "prompt"}, {"start", 0}, {"end", text.size()}});
  for (const auto& turn : t.turns) {
    ordered_json actions = ordered_json::array();
    for (const auto& a : turn.actions) actions.push_back({{"kind", to_string(a.kind)}, {"text", a.text}});
    ordered_json tj;
    tj["model_text"] = turn.model_text;
    tj["actions"] = actions;
    tj["feedback"] = turn.feedback ? json(*turn.feedback) : json(nullptr);
    turns.push_back(tj);
    segments.push_back({{"kind", "model_text"}, {"start", text.size()}, {"end", text.size() + turn.model_text.size()}});
    text += turn.model_text;
    if (turn.feedback) {
      // reminders are instructions, search results are observations; both get masked
      const char* kind = turn.action().kind == ActionKind::Malformed ? "prompt" : "observation";
      segments.push_back({{"kind", kind}, {"start", text.size()}, {"end", text.size() + turn.feedback->size()}});
      text += *turn.feedback;
    }
  }
  j["turns"] = turns;
  j["text"] = text;
  j["segments"] = segments;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Trajectory parse_trajectory(std::string_view line) {
  const json j = parse_json_line(line);
  auto field = [&](const char* k) -> const json& {
    if (!j.contains(k)) fail(ErrorCode::SchemaViolation, k);
    return j[k];
  };
  if (field("version") != kTrajectoryVersion) fail(ErrorCode::SchemaViolation, "version");
  try {
    Trajectory t;
    t.id = field("id").get<std::string>();
    t.question = field("question").get<std::string>();
    t.golds = field("golds").get<std::vector<std::string>>();
    t.termination = termination_from(field("termination").get<std::string>());
    if (!field("final_answer").is_null()) t.final_answer = j["final_answer"].get<std::string>();
    t.reward = field("reward").get<int>();
    const std::string text = field("text").get<std::string>();
    const auto& segs = field("segments");
    if (!segs.is_array() || segs.empty() || segs[0]["kind"] != "prompt") fail(ErrorCode::SchemaViolation, "segments");
    t.prompt = text.substr(0, segs[0]["end"].get<std::size_t>());
    for (const auto& tj : field("turns")) {
      Turn turn;
      turn.model_text = tj.at("model_text").get<std::string>();
      for (const auto& a : tj.at("actions"))
        turn.actions.push_back({action_kind_from(a.at("kind").get<std::string>()), a.at("text").get<std::string>()});
      if (turn.actions.empty()) fail(ErrorCode::SchemaViolation, "turns.actions");
      if (!tj.at("feedback").is_null()) turn.feedback = tj["feedback"].get<std::string>();
      t.turns.push_back(std::move(turn));
    }
    if (t.transcript() != text) fail(ErrorCode::SchemaViolation, "text");
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, e.what());
  }
}

void export_trajectories(const std::vector<Trajectory>& trajectories, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : trajectories) out += render_trajectory(t) + "\n";
  io::write_file(path, out);
}

std::vector<Trajectory> import_trajectories(const std::filesystem::path& path) {
  std::vector<Trajectory> out;
  for (const auto& line : io::read_lines(path)) out.push_back(parse_trajectory(line));
  return out;
}

}  // namespace orbit
