#include "orbit/genesis.hpp"

#include <set>

#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/parallel.hpp"
#include "orbit/stage_io.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

namespace {

// Case-insensitive find of an ASCII tag.
std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from = 0) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    if (text::iequals(hay.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::size_t irfind(std::string_view hay, std::string_view needle) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = hay.size() - needle.size() + 1; i-- > 0;) {
    if (text::iequals(hay.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::string_view section(std::string_view block, const std::string& name) {
  const std::string open = "<" + name + ">";
  const std::string close = "</" + name + ">";
  const auto b = ifind(block, open);
  if (b == std::string_view::npos) fail(ErrorCode::MissingSection, name);
  const auto e = ifind(block, close, b + open.size());
  if (e == std::string_view::npos) fail(ErrorCode::MissingSection, name);
  return block.substr(b + open.size(), e - b - open.size());
}

bool parse_positive(std::string_view s, int& out) {
  const std::string t = text::trim(s);
  if (t.empty() || t.size() > 6) return false;
  int v = 0;
  for (char c : t) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  if (v <= 0) return false;
  out = v;
  return true;
}

ChecklistItem parse_item(std::string_view raw, std::size_t item_number) {
  const std::string body = text::decode_entities(raw);
  ChecklistItem item;
  std::string statement;
  std::size_t i = 0;
  while (i < body.size()) {
    // ":cite[...]", optionally with blanks after the colon
    if (body[i] == ':') {
      std::size_t j = i + 1;
      while (j < body.size() && (body[j] == ' ' || body[j] == '\t')) ++j;
      if (text::istarts_with(std::string_view(body).substr(j), "cite[")) {
        const std::size_t open = j + 4;
        const std::size_t close = body.find(']', open);
        if (close == std::string::npos) fail(ErrorCode::UnparseableCite, std::to_string(item_number));
        for (const auto& part : text::split(std::string_view(body).substr(open + 1, close - open - 1), ',')) {
          int v = 0;
          if (!parse_positive(part, v)) fail(ErrorCode::UnparseableCite, std::to_string(item_number));
          item.cites.push_back(v);
        }
        statement.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    statement.push_back(body[i++]);
  }
  item.text = text::collapse_whitespace(statement);
  if (item.cites.empty() || item.text.empty()) fail(ErrorCode::UnparseableCite, std::to_string(item_number));
  return item;
}

std::vector<EvidenceRef> parse_evidence(std::string_view raw) {
  const std::string body = text::decode_entities(raw);
  struct Marker {
    std::size_t start, content;
    int index;
  };
  std::vector<Marker> markers;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < body.size() && j - i <= 7 && body[j] >= '0' && body[j] <= '9') ++j;
    if (j == i + 1 || j >= body.size() || body[j] != ']') continue;
    std::size_t k = j + 1;
    while (k < body.size() && (body[k] == ' ' || body[k] == '\t')) ++k;
    if (k >= body.size() || body[k] != ':') continue;
    int idx = 0;
    const std::string digits = body.substr(i + 1, j - i - 1);
    if (!parse_positive(digits, idx)) fail(ErrorCode::UnparseableEvidenceEntry, digits);
    markers.push_back({i, k + 1, idx});
    i = k;
  }
  const std::string lead = text::trim(std::string_view(body).substr(0, markers.empty() ? body.size() : markers[0].start));
  if (!lead.empty()) fail(ErrorCode::UnparseableEvidenceEntry, "0");
  std::vector<EvidenceRef> out;
  std::set<int> seen;
  for (std::size_t m = 0; m < markers.size(); ++m) {
    const std::size_t end = m + 1 < markers.size() ? markers[m + 1].start : body.size();
    std::string url = text::trim(std::string_view(body).substr(markers[m].content, end - markers[m].content));
    while (!url.empty() && (url.back() == ',' || url.back() == ';' || std::isspace(static_cast<unsigned char>(url.back()))))
      url.pop_back();
    const std::string k = std::to_string(markers[m].index);
    if (!is_absolute_http_url(url) || !seen.insert(markers[m].index).second)
      fail(ErrorCode::UnparseableEvidenceEntry, k);
    out.push_back(EvidenceRef{markers[m].index, std::move(url)});
  }
  return out;
}

std::string seed_rng_key(const Seed& seed, int attempt) { return seed_key(seed) + "#" + std::to_string(attempt); }

bool is_parse_error(ErrorCode c) {
  return c == ErrorCode::NoOutputBlock || c == ErrorCode::MissingSection || c == ErrorCode::UnparseableCite ||
         c == ErrorCode::UnparseableEvidenceEntry;
}

}  // namespace

CandidatePair parse_generation_output(std::string_view text) {
  const auto open = irfind(text, "<output>");
  if (open == std::string_view::npos) fail(ErrorCode::NoOutputBlock);
  auto close = ifind(text, "</output>", open);
  if (close == std::string_view::npos) close = text.size();
  const std::string_view block = text.substr(open + 8, close - open - 8);

  CandidatePair pair;
  pair.question = text::trim(text::decode_entities(section(block, "inverted_question")));
  pair.answer = text::trim(text::decode_entities(section(block, "answer")));
  if (pair.question.empty()) fail(ErrorCode::MissingSection, "inverted_question");
  if (pair.answer.empty()) fail(ErrorCode::MissingSection, "answer");
  const std::string_view checklist = section(block, "verification_checklist");
  std::size_t pos = 0;
  while (true) {
    const auto b = ifind(checklist, "<item>", pos);
    if (b == std::string_view::npos) break;
    const auto e = ifind(checklist, "</item>", b + 6);
    if (e == std::string_view::npos) fail(ErrorCode::UnparseableCite, std::to_string(pair.checklist.size() + 1));
    pair.checklist.push_back(parse_item(checklist.substr(b + 6, e - b - 6), pair.checklist.size() + 1));
    pos = e + 7;
  }
  if (pair.checklist.empty()) fail(ErrorCode::MissingSection, "item");
  pair.evidence = parse_evidence(section(block, "evidence_urls"));
  pair.raw_output = std::string(text);
  return pair;
}

std::string render_generation_output(const CandidatePair& pair) {
  std::string out = "<output>\n    <inverted_question>" + text::escape_xml(pair.question) + "</inverted_question>\n";
  out += "    <answer>" + text::escape_xml(pair.answer) + "</answer>\n    <verification_checklist>\n";
  for (const auto& item : pair.checklist) {
    out += "        <item>" + text::escape_xml(item.text) + " :cite[";
    for (std::size_t i = 0; i < item.cites.size(); ++i) out += (i ? "," : "") + std::to_string(item.cites[i]);
    out += "]</item>\n";
  }
  out += "    </verification_checklist>\n    <evidence_urls>";
  for (std::size_t i = 0; i < pair.evidence.size(); ++i) {
    if (i) out += ", ";
    out += "[" + std::to_string(pair.evidence[i].index) + "]: " + text::escape_xml(pair.evidence[i].url);
  }
  out += "</evidence_urls>\n</output>";
  return out;
}

std::string_view to_string(DiscardReason r) {
  switch (r) {
    case DiscardReason::ParseFailure: return "ParseFailure";
    case DiscardReason::MissingSection: return "MissingSection";
    case DiscardReason::TooFewEvidence: return "TooFewEvidence";
    case DiscardReason::AnswerEqualsSeed: return "AnswerEqualsSeed";
  }
  return "ParseFailure";
}

GenerationOutcome generate_pair(const Seed& seed, Gateway& gateway, const TemplateSet& templates,
                                const GenerationPolicy& policy) {
  GenerationOutcome outcome;
  const int max_attempts = std::max(1, policy.max_attempts);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    outcome.attempts = attempt;
    Rng rng(policy.rng_seed ^ sha256_u64(seed_rng_key(seed, attempt)));
    ChatRequest req;
    req.user = templates.render("generation", {{"seed", seed.page_title}}, &rng);
    req.temperature = policy.temperature;
    req.top_p = policy.top_p;
    req.max_tokens = policy.max_tokens;
    outcome.raw = gateway.complete(policy.profile, req).text;
    CandidatePair pair;
    try {
      pair = parse_generation_output(outcome.raw);
      const auto problems = validate_candidate(pair);
      for (const auto& v : problems) {
        if (v.rule == "UnresolvedCite") fail(ErrorCode::UnparseableCite, v.detail);
      }
    } catch (const Error& e) {
      if (!is_parse_error(e.code())) throw;
      outcome.reason = e.code() == ErrorCode::MissingSection ? DiscardReason::MissingSection
                                                              : DiscardReason::ParseFailure;
      outcome.detail = e.what();
      log::info("generate", seed.page_title, "unparseable output",
                {{"attempt", attempt}, {"error", e.what()}});
      continue;
    }
    if (pair.evidence.size() < policy.min_evidence) {
      outcome.reason = DiscardReason::TooFewEvidence;
      outcome.detail = std::to_string(pair.evidence.size()) + " < " + std::to_string(policy.min_evidence);
      return outcome;
    }
    if (text::iequals(text::trim(pair.answer), text::trim(seed.page_title)) ||
        text::to_lower(text::collapse_whitespace(pair.answer)) ==
            text::to_lower(text::collapse_whitespace(seed.page_title))) {
      outcome.reason = DiscardReason::AnswerEqualsSeed;
      outcome.detail = pair.answer;
      return outcome;
    }
    pair.seed = seed;
    pair.id = make_pair_id(seed.page_title, pair.question);
    pair.generator_model = gateway.profile(policy.profile).model;
    outcome.pair = std::move(pair);
    outcome.detail.clear();
    return outcome;
  }
  return outcome;
}

Stage2Summary run_stage2(const std::vector<Seed>& seeds, Gateway& gateway, const TemplateSet& templates,
                         const GenerationPolicy& policy, const Stage2Paths& paths) {
  Stage2Summary summary;
  summary.input = seeds.size();
  std::set<std::string> done;
  for (const auto& line : io::read_lines(paths.candidates, true)) done.insert(seed_key(parse_candidate(line).seed));
  for (const auto& line : io::read_lines(paths.discards, true)) {
    const auto j = parse_json_line(line);
    if (j.contains("seed")) done.insert(seed_key(seed_from_json(j["seed"], "seed.")));
  }
  std::vector<const Seed*> todo;
  std::set<std::string> queued;
  for (const auto& s : seeds) {
    const std::string key = seed_key(s);
    if (done.count(key) || !queued.insert(key).second) {
      ++summary.skipped;
      continue;
    }
    todo.push_back(&s);
  }

  struct Result {
    GenerationOutcome outcome;
    std::string error;
  };
  ChunkedRunner runner(policy.workers);
  runner.run<Result>(
      todo.size(),
      [&](std::size_t i) {
        Result r;
        try {
          r.outcome = generate_pair(*todo[i], gateway, templates, policy);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ProviderTimeout && e.code() != ErrorCode::ProviderRefusal &&
              e.code() != ErrorCode::ProviderError && e.code() != ErrorCode::ScenarioExhausted &&
              e.code() != ErrorCode::UnmatchedRequest)
            throw;
          r.error = e.what();
        }
        return r;
      },
      [&](std::size_t i, Result& r) {
        const Seed& seed = *todo[i];
        if (!r.error.empty()) {
          ++summary.dead_lettered;
          io::append_lines(paths.dead_letters, {render_dead_letter("generate", seed_to_json(seed), r.error)});
        } else if (r.outcome.pair) {
          ++summary.produced;
          io::append_lines(paths.candidates, {render_candidate(*r.outcome.pair)});
        } else {
          ++summary.discarded;
          nlohmann::ordered_json d;
          d["version"] = kRecordVersion;
          d["seed"] = seed_to_json(seed);
          d["reason"] = to_string(r.outcome.reason);
          d["attempts"] = r.outcome.attempts;
          d["detail"] = r.outcome.detail;
          d["raw"] = r.outcome.raw;
          io::append_lines(paths.discards, {d.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)});
        }
      });
  return summary;
}

}  // namespace orbit
