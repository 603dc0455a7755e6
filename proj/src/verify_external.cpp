#include "orbit/verify_external.hpp"

#include <cctype>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/stage_io.hpp"
#include "orbit/text.hpp"
#include "orbit/verify_self.hpp"

namespace orbit {

using nlohmann::json;

void validate_cascade_config(const CascadeConfig& config, const Gateway& gateway,
                             const std::set<std::string>& generator_models) {
  if (config.round_profiles.empty()) fail(ErrorCode::ConfigError, "cascade has no rounds");
  for (const auto& name : config.round_profiles) {
    if (!gateway.has(name)) fail(ErrorCode::ConfigError, "unknown judge profile " + name);
    const auto& model = gateway.profile(name).model;
    if (!model.empty() && generator_models.count(model))
      fail(ErrorCode::ConfigError, "judge profile " + name + " uses generator model " + model);
  }
}

std::string judge_answer(const TrainingExample& pair, const EvidenceBundle& bundle, Gateway& gateway,
                         const TemplateSet& templates, const std::string& profile, const CascadeConfig& config) {
  if (text::trim(pair.question).empty()) fail(ErrorCode::PreconditionViolation, "empty question");
  if (bundle.blocks.empty()) fail(ErrorCode::PreconditionViolation, "empty evidence bundle");
  ChatRequest req;
  req.user = templates.render("judge_answer", {{"question", pair.question}, {"evidence", bundle.render()}});
  req.temperature = config.answer_temperature;
  req.max_tokens = config.max_tokens;
  return gateway.complete(profile, req).text;
}

ParsedJudgeVerdict parse_judge_verdict(std::string_view response) {
  const std::string lower = text::to_lower(response);
  const auto at = lower.rfind("judge:");
  if (at == std::string::npos) fail(ErrorCode::UnparseableVerdict, std::string(response));
  std::size_t i = at + 6;
  auto is_markup = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '*' || c == '_' || c == '`' || c == '"' || c == '\'' ||
           c == '[' || c == '(';
  };
  while (i < lower.size() && is_markup(lower[i])) ++i;
  std::size_t j = i;
  while (j < lower.size() && std::isalpha(static_cast<unsigned char>(lower[j]))) ++j;
  const std::string word = lower.substr(i, j - i);
  ParsedJudgeVerdict out;
  if (word == "correct") out.verdict = JudgeVerdict::Correct;
  else if (word == "incorrect") out.verdict = JudgeVerdict::Incorrect;
  else fail(ErrorCode::UnparseableVerdict, std::string(response));
  // drop emphasis that opened the marker, e.g. "**Judge:**"
  std::size_t cut = at;
  while (cut > 0 && (response[cut - 1] == '*' || response[cut - 1] == '_')) --cut;
  out.rationale = text::trim(response.substr(0, cut));
  return out;
}

JudgeResult judge_verdict(const TrainingExample& pair, const std::string& predicted, Gateway& gateway,
                          const TemplateSet& templates, const std::string& profile, const CascadeConfig& config,
                          int round) {
  ChatRequest req;
  req.user = templates.render("judge_verdict", {{"question", pair.question},
                                                {"ground_truth_answer", pair.answer},
                                                {"predicted_answer", predicted}});
  req.temperature = config.verdict_temperature;
  req.max_tokens = config.max_tokens;
  std::string response = gateway.complete(profile, req).text;
  ParsedJudgeVerdict parsed;
  try {
    parsed = parse_judge_verdict(response);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableVerdict) throw;
    log::warn("verify-external", pair.id, "re-asking for a verdict line", {{"profile", profile}});
    req.user += "\n" + templates.render("verdict_reask", {});
    parsed = parse_judge_verdict(gateway.complete(profile, req).text);
  }
  return JudgeResult{round, predicted, parsed.verdict, parsed.rationale};
}

CascadeOutcome run_cascade(const TrainingExample& pair, const EvidenceBundle& bundle, Gateway& gateway,
                           const TemplateSet& templates, const CascadeConfig& config, const std::string& created_at) {
  CascadeOutcome out;
  for (std::size_t k = 0; k < config.round_profiles.size(); ++k) {
    const auto& profile = config.round_profiles[k];
    const std::string predicted = judge_answer(pair, bundle, gateway, templates, profile, config);
    out.rounds.push_back(judge_verdict(pair, predicted, gateway, templates, profile, config, static_cast<int>(k) + 1));
    if (out.rounds.back().verdict == JudgeVerdict::Correct) {
      TrainingExample rec = pair;
      rec.external = out.rounds;
      rec.provenance.stage = std::string(kExternalVerifiedStage);
      rec.provenance.created_at = created_at;
      out.accepted = std::move(rec);
      break;
    }
  }
  return out;
}

namespace {

struct ManualRow {
  std::string question, answer, annotator, created_at;
  std::vector<std::string> evidence;
};

TrainingExample manual_record(const ManualRow& row, std::size_t line, const std::string& stamp) {
  auto require = [&](const std::string& value, const char* field) {
    if (text::trim(value).empty())
      fail(ErrorCode::SchemaViolation, "row " + std::to_string(line) + ": " + field);
  };
  require(row.question, "question");
  require(row.answer, "answer");
  require(row.annotator, "annotator");
  TrainingExample r;
  r.question = text::trim(row.question);
  r.answer = text::trim(row.answer);
  r.id = make_pair_id("", r.question);
  for (std::size_t i = 0; i < row.evidence.size(); ++i) {
    if (!is_absolute_http_url(row.evidence[i]))
      fail(ErrorCode::SchemaViolation, "row " + std::to_string(line) + ": evidence");
    r.evidence.push_back({static_cast<int>(i) + 1, row.evidence[i]});
  }
  r.provenance.generator_model = "manual";
  r.provenance.stage = std::string(kManualImportStage);
  r.provenance.annotator = text::trim(row.annotator);
  r.provenance.created_at = row.created_at.empty() ? stamp : row.created_at;
  if (!row.created_at.empty()) {
    try {
      parse_utc(row.created_at);
    } catch (const Error&) {
      fail(ErrorCode::SchemaViolation, "row " + std::to_string(line) + ": created_at");
    }
  }
  return r;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : text::split(text::collapse_whitespace(s), ' '))
    if (!part.empty()) out.push_back(std::move(part));
  return out;
}

}  // namespace

std::vector<TrainingExample> import_manual(const std::filesystem::path& file, const Clock& clock) {
  const std::string content = io::read_file(file);
  const std::string stamp = format_utc(clock.now());
  std::vector<TrainingExample> out;
  if (text::to_lower(file.extension().string()) == ".csv") {
    const auto rows = text::parse_csv(content);
    if (rows.empty()) return out;
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[text::to_lower(text::trim(rows[0][i]))] = i;
    for (const char* f : {"question", "answer", "annotator"})
      if (!col.count(f)) fail(ErrorCode::SchemaViolation, std::string("header: ") + f);
    auto get = [&](const std::vector<std::string>& row, const std::string& name) {
      auto it = col.find(name);
      return it == col.end() || it->second >= row.size() ? std::string{} : row[it->second];
    };
    for (std::size_t i = 1; i < rows.size(); ++i) {
      ManualRow row{get(rows[i], "question"), get(rows[i], "answer"), get(rows[i], "annotator"),
                    text::trim(get(rows[i], "created_at")), split_ws(get(rows[i], "evidence"))};
      out.push_back(manual_record(row, i + 1, stamp));
    }
    return out;
  }
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = parse_json_line(line);
    } catch (const Error&) {
      fail(ErrorCode::SchemaViolation, "row " + std::to_string(line_no) + ": json");
    }
    auto str = [&](const char* k) {
      if (!j.is_object() || !j.contains(k) || j[k].is_null()) return std::string{};
      if (!j[k].is_string()) fail(ErrorCode::SchemaViolation, "row " + std::to_string(line_no) + ": " + k);
      return j[k].get<std::string>();
    };
    ManualRow row{str("question"), str("answer"), str("annotator"), str("created_at"), {}};
    if (j.is_object() && j.contains("evidence")) {
      if (!j["evidence"].is_array()) fail(ErrorCode::SchemaViolation, "row " + std::to_string(line_no) + ": evidence");
      for (const auto& u : j["evidence"]) {
        if (!u.is_string()) fail(ErrorCode::SchemaViolation, "row " + std::to_string(line_no) + ": evidence");
        row.evidence.push_back(u.get<std::string>());
      }
    }
    out.push_back(manual_record(row, line_no, stamp));
  }
  return out;
}

Stage4Summary run_stage4(const std::vector<TrainingExample>& records, const std::map<std::string, WebDocument>& docs,
                         Gateway& gateway, const TemplateSet& templates, const CascadeConfig& config,
                         const Stage4Paths& paths, const Clock& clock) {
  for (const auto& name : config.round_profiles) gateway.profile(name);
  Stage4Summary summary;
  summary.accepted_in_round.assign(config.round_profiles.size(), 0);
  std::set<std::string> done;
  for (const auto& line : io::read_lines(paths.accepted, true)) done.insert(parse_record(line).id);
  for (const auto& line : io::read_lines(paths.rejected, true)) {
    const auto j = parse_json_line(line);
    if (j.contains("record") && j["record"].contains("id")) done.insert(j["record"]["id"].get<std::string>());
  }
  std::vector<const TrainingExample*> todo;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) continue;
    if (done.count(r.id)) {
      ++summary.skipped;
      continue;
    }
    todo.push_back(&r);
  }
  summary.input = seen.size();

  struct Result {
    CascadeOutcome outcome;
    bool no_evidence = false;
    std::string error;
  };
  const std::string stamp = format_utc(clock.now());
  ChunkedRunner(config.workers)
      .run<Result>(
          todo.size(),
          [&](std::size_t i) {
            Result r;
            try {
              const auto bundle = build_evidence_bundle(*todo[i], docs, config.bundle_budget);
              r.outcome = run_cascade(*todo[i], bundle, gateway, templates, config, stamp);
            } catch (const Error& e) {
              if (e.code() == ErrorCode::NoLiveEvidence) r.no_evidence = true;
              else if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::UnknownTemplate ||
                       e.code() == ErrorCode::UnboundPlaceholder || e.code() == ErrorCode::InvalidArgument)
                throw;
              else r.error = e.what();
            }
            return r;
          },
          [&](std::size_t i, Result& r) {
            const TrainingExample& rec = *todo[i];
            if (!r.error.empty()) {
              ++summary.dead_lettered;
              io::append_lines(paths.dead_letters, {render_dead_letter("verify-external", example_to_json(rec), r.error)});
              return;
            }
            if (r.outcome.accepted) {
              ++summary.accepted;
              ++summary.accepted_in_round[r.outcome.rounds.size() - 1];
              io::append_lines(paths.accepted, {render_record(*r.outcome.accepted)});
              return;
            }
            ++summary.rejected;
            TrainingExample rej = rec;
            rej.external = r.outcome.rounds;
            if (r.no_evidence) ++summary.no_evidence;
            io::append_lines(paths.rejected,
                             {render_rejection(r.no_evidence ? "NoLiveEvidence" : "judges:Incorrect", rej)});
          });
  return summary;
}

}  // namespace orbit
