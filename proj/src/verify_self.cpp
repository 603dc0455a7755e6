#include "orbit/verify_self.hpp"

#include <algorithm>
#include <set>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/stage_io.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

namespace {

std::string strip_decoration(std::string s) {
  auto is_deco = [](char c) {
    return c == '*' || c == '_' || c == '`' || c == '"' || c == '#' || c == '>' || std::isspace(static_cast<unsigned char>(c));
  };
  while (!s.empty() && is_deco(s.front())) s.erase(s.begin());
  while (!s.empty() && is_deco(s.back())) s.pop_back();
  return s;
}

bool is_no_revision(const std::string& v) {
  static const std::set<std::string> kNone = {"none", "n/a", "na", "no", "-", "no revision", "no revision needed",
                                              "not needed", "unchanged", "same", "no change", "n.a."};
  std::string t = text::to_lower(text::collapse_whitespace(v));
  while (!t.empty() && (t.back() == '.' || t.back() == ')')) t.pop_back();
  return t.empty() || kNone.count(t) > 0;
}

std::size_t ifind(std::string_view hay, std::string_view needle) {
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (text::iequals(hay.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<std::string> extract_revised_answer(std::string_view report) {
  const auto lines = text::split_lines(report);
  for (std::size_t i = lines.size(); i-- > 0;) {
    const auto at = ifind(lines[i], "revised answer");
    if (at == std::string_view::npos) continue;
    std::string rest = lines[i].substr(at + 14);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) continue;
    // only decoration may sit between the phrase and the colon
    if (!strip_decoration(rest.substr(0, colon)).empty()) continue;
    std::string value = strip_decoration(rest.substr(colon + 1));
    if (value.empty()) {
      for (std::size_t k = i + 1; k < lines.size(); ++k) {
        value = strip_decoration(lines[k]);
        if (!value.empty()) break;
      }
    }
    if (!value.empty() && value.back() == '.') value.pop_back();
    value = strip_decoration(text::collapse_whitespace(value));
    if (is_no_revision(value)) return std::nullopt;
    return value;
  }
  return std::nullopt;
}

SelfVerdict parse_classifier_verdict(std::string_view response) {
  const auto lines = text::split_lines(response);
  for (std::size_t i = lines.size(); i-- > 0;) {
    const auto at = ifind(lines[i], "verdict:");
    if (at == std::string_view::npos) continue;
    std::string token = text::to_lower(strip_decoration(lines[i].substr(at + 8)));
    while (!token.empty() && !std::isalpha(static_cast<unsigned char>(token.back()))) token.pop_back();
    if (token == "full" || token == "fully verified") return SelfVerdict::FullyVerified;
    if (token == "partial" || token == "partially verified") return SelfVerdict::PartiallyVerified;
    if (token == "incorrect") return SelfVerdict::Incorrect;
    fail(ErrorCode::UnparseableVerdict, text::utf8_truncate(response, 200));
  }
  fail(ErrorCode::UnparseableVerdict, text::utf8_truncate(response, 200));
}

SelfVerification run_self_verification(const CandidatePair& pair, Gateway& gateway, const TemplateSet& templates,
                                       const SelfVerifyPolicy& policy) {
  ChatRequest req;
  req.user = templates.render("self_verify", {{"question", pair.question}, {"answer", pair.answer}});
  req.temperature = policy.verifier_temperature;
  req.max_tokens = policy.max_tokens;
  SelfVerification sv;
  sv.report = gateway.complete(policy.verifier_profile, req).text;
  if (text::trim(sv.report).empty()) fail(ErrorCode::EmptyReport, pair.id);
  sv.revised_answer = extract_revised_answer(sv.report);
  sv.cited_urls = scan_urls(sv.report);
  return sv;
}

SelfVerdict classify_report(const CandidatePair& pair, const std::string& report, Gateway& gateway,
                            const TemplateSet& templates, const SelfVerifyPolicy& policy) {
  ChatRequest req;
  req.user = templates.render("self_verify_classifier",
                              {{"question", pair.question}, {"answer", pair.answer}, {"report", report}});
  req.temperature = policy.classifier_temperature;
  req.max_tokens = policy.max_tokens;
  return parse_classifier_verdict(gateway.complete(policy.classifier_profile, req).text);
}

std::optional<TrainingExample> accept_self_verified(const CandidatePair& pair, SelfVerification sv,
                                                    const SelfVerifyPolicy& policy, const std::string& created_at) {
  TrainingExample r = to_example(pair);
  r.provenance.created_at = created_at;
  r.provenance.stage = std::string(kSelfVerifiedStage);
  const bool accepted = sv.verdict && policy.accept.count(*sv.verdict);
  if (accepted && policy.adopt_revised_answer && sv.revised_answer &&
      text::trim(*sv.revised_answer) != text::trim(r.answer)) {
    r.provenance.original_answer = r.answer;
    r.answer = *sv.revised_answer;
  }
  r.self_verification = std::move(sv);
  if (!accepted) return std::nullopt;
  return r;
}

std::string render_rejection(std::string_view reason, const TrainingExample& record) {
  nlohmann::ordered_json j;
  j["version"] = kRecordVersion;
  j["reason"] = reason;
  j["record"] = example_to_json(record);
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Stage3Summary run_stage3(const std::vector<CandidatePair>& candidates, Gateway& gateway, const TemplateSet& templates,
                         const SelfVerifyPolicy& policy, const Stage3Paths& paths, const Clock& clock) {
  const auto& vp = gateway.profile(policy.verifier_profile);
  if (vp.kind != "scripted" && !vp.capabilities.web_search)
    fail(ErrorCode::ConfigError, "verifier profile " + vp.name + " lacks web_search");
  gateway.profile(policy.classifier_profile);

  Stage3Summary summary;
  std::set<std::string> kept_ids, rejected_ids;
  for (const auto& line : io::read_lines(paths.verified, true)) kept_ids.insert(parse_record(line).id);
  for (const auto& line : io::read_lines(paths.rejected, true)) {
    const auto j = parse_json_line(line);
    if (j.contains("record") && j["record"].contains("id")) rejected_ids.insert(j["record"]["id"].get<std::string>());
  }
  std::vector<const CandidatePair*> todo;
  std::set<std::string> input_ids;
  for (const auto& c : candidates) {
    if (!input_ids.insert(c.id).second) continue;
    if (kept_ids.count(c.id) || rejected_ids.count(c.id)) {
      ++summary.skipped;
      continue;
    }
    todo.push_back(&c);
  }
  summary.input = input_ids.size();

  struct Result {
    SelfVerification sv;
    std::string error;
  };
  const std::string stamp = format_utc(clock.now());
  ChunkedRunner(policy.workers)
      .run<Result>(
          todo.size(),
          [&](std::size_t i) {
            Result r;
            try {
              r.sv = run_self_verification(*todo[i], gateway, templates, policy);
              r.sv.verdict = classify_report(*todo[i], r.sv.report, gateway, templates, policy);
            } catch (const Error& e) {
              if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::ConfigError ||
                  e.code() == ErrorCode::UnknownTemplate || e.code() == ErrorCode::UnboundPlaceholder)
                throw;
              r.error = e.what();
            }
            return r;
          },
          [&](std::size_t i, Result& r) {
            const CandidatePair& pair = *todo[i];
            if (!r.error.empty()) {
              ++summary.dead_lettered;
              TrainingExample rec = to_example(pair);
              rec.self_verification = r.sv;
              rec.provenance.created_at = stamp;
              rec.provenance.stage = std::string(kSelfVerifiedStage);
              io::append_lines(paths.dead_letters, {render_dead_letter("verify-self", example_to_json(rec), r.error)});
              return;
            }
            switch (*r.sv.verdict) {
              case SelfVerdict::FullyVerified: ++summary.full; break;
              case SelfVerdict::PartiallyVerified: ++summary.partial; break;
              case SelfVerdict::Incorrect: ++summary.incorrect; break;
            }
            const SelfVerdict verdict = *r.sv.verdict;
            if (auto rec = accept_self_verified(pair, r.sv, policy, stamp)) {
              kept_ids.insert(pair.id);
              io::append_lines(paths.verified, {render_record(*rec)});
            } else {
              ++summary.rejected;
              TrainingExample rej = to_example(pair);
              rej.self_verification = std::move(r.sv);
              rej.provenance.created_at = stamp;
              rej.provenance.stage = std::string(kSelfVerifiedStage);
              io::append_lines(paths.rejected, {render_rejection("verdict:" + std::string(to_string(verdict)), rej)});
            }
          });
  for (const auto& id : input_ids) summary.kept += kept_ids.count(id);
  if (summary.input > 0) summary.retention = static_cast<double>(summary.kept) / static_cast<double>(summary.input);
  return summary;
}

}  // namespace orbit
