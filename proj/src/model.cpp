#include "orbit/model.hpp"

#include <set>

#include "orbit/clock.hpp"
#include "orbit/error.hpp"
#include "orbit/hash.hpp"
#include "orbit/text.hpp"
#include "orbit/url.hpp"

namespace orbit {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, kDomainCount> kDomainNames = {
    "TV Shows & Movies", "Science & Technology", "Art",       "History",  "Sports",
    "Music",             "Video Games",          "Geography", "Politics", "Medicine",
    "Finance",           "Law",                  "Puzzles",   "Mathematics", "Code",
};

[[noreturn]] void schema(const std::string& field) { fail(ErrorCode::SchemaViolation, field); }

const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) schema(path + key);
  return *it;
}

std::string req_string(const json& j, const char* key, const std::string& path = "") {
  const json& v = require(j, key, path);
  if (!v.is_string()) schema(path + key);
  return v.get<std::string>();
}

std::optional<std::string> opt_string(const json& j, const char* key, const std::string& path = "") {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema(path + key);
  return it->get<std::string>();
}

const json& req_array(const json& j, const char* key, const std::string& path = "") {
  const json& v = require(j, key, path);
  if (!v.is_array()) schema(path + key);
  return v;
}

const json& req_object(const json& j, const char* key, const std::string& path = "") {
  const json& v = require(j, key, path);
  if (!v.is_object()) schema(path + key);
  return v;
}

int req_int(const json& j, const char* key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer()) schema(path + key);
  return v.get<int>();
}

void check_version(const json& j) {
  const std::string v = req_string(j, "version");
  if (v != kRecordVersion) schema("version");
}

ojson checklist_to_json(const std::vector<ChecklistItem>& items) {
  ojson arr = ojson::array();
  for (const auto& c : items) {
    ojson o;
    o["text"] = c.text;
    o["cites"] = c.cites;
    arr.push_back(std::move(o));
  }
  return arr;
}

std::vector<ChecklistItem> checklist_from_json(const json& arr) {
  std::vector<ChecklistItem> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "checklist[" + std::to_string(i) + "].";
    if (!arr[i].is_object()) schema("checklist[" + std::to_string(i) + "]");
    ChecklistItem c;
    c.text = req_string(arr[i], "text", path);
    for (const auto& n : req_array(arr[i], "cites", path)) {
      if (!n.is_number_integer()) schema(path + "cites");
      c.cites.push_back(n.get<int>());
    }
    out.push_back(std::move(c));
  }
  return out;
}

ojson evidence_to_json(const std::vector<EvidenceRef>& refs) {
  ojson arr = ojson::array();
  for (const auto& e : refs) {
    ojson o;
    o["index"] = e.index;
    o["url"] = e.url;
    arr.push_back(std::move(o));
  }
  return arr;
}

std::vector<EvidenceRef> evidence_from_json(const json& arr) {
  std::vector<EvidenceRef> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "evidence[" + std::to_string(i) + "].";
    if (!arr[i].is_object()) schema("evidence[" + std::to_string(i) + "]");
    out.push_back({req_int(arr[i], "index", path), req_string(arr[i], "url", path)});
  }
  return out;
}

void check_checklist(const std::vector<ChecklistItem>& checklist, const std::vector<EvidenceRef>& evidence,
                     std::vector<Violation>& out) {
  std::set<int> indices;
  for (const auto& e : evidence) indices.insert(e.index);
  for (std::size_t i = 0; i < checklist.size(); ++i) {
    const std::string field = "checklist[" + std::to_string(i) + "]";
    if (text::trim(checklist[i].text).empty()) out.push_back({field + ".text", "EmptyField", "text"});
    if (checklist[i].cites.empty()) out.push_back({field + ".cites", "EmptyCites", ""});
    for (int c : checklist[i].cites) {
      if (c <= 0 || !indices.count(c)) out.push_back({field + ".cites", "UnresolvedCite", std::to_string(c)});
    }
  }
}

void check_evidence(const std::vector<EvidenceRef>& evidence, std::vector<Violation>& out) {
  std::set<int> seen;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    const std::string field = "evidence[" + std::to_string(i) + "]";
    if (evidence[i].index <= 0) out.push_back({field + ".index", "NonPositiveIndex", std::to_string(evidence[i].index)});
    if (!seen.insert(evidence[i].index).second)
      out.push_back({field + ".index", "DuplicateIndex", std::to_string(evidence[i].index)});
    if (!is_absolute_http_url(evidence[i].url)) out.push_back({field + ".url", "InvalidUrl", evidence[i].url});
  }
}

}  // namespace

const std::array<Domain, kDomainCount>& all_domains() {
  static const std::array<Domain, kDomainCount> all = [] {
    std::array<Domain, kDomainCount> a{};
    for (std::size_t i = 0; i < kDomainCount; ++i) a[i] = static_cast<Domain>(i);
    return a;
  }();
  return all;
}

std::string_view to_string(Domain d) { return kDomainNames[static_cast<std::size_t>(d)]; }

std::optional<Domain> parse_domain(std::string_view name) {
  for (std::size_t i = 0; i < kDomainCount; ++i) {
    if (kDomainNames[i] == name) return static_cast<Domain>(i);
  }
  return std::nullopt;
}

std::string seed_key(const Seed& s) {
  std::string k(to_string(s.domain));
  k += '\x1f';
  k += s.category;
  k += '\x1f';
  k += s.page_title;
  return k;
}

std::string make_pair_id(std::string_view page_title, std::string_view question) {
  std::string material(page_title);
  material += '\x1f';
  material += question;
  return sha256_hex(material).substr(0, 16);
}

std::string_view to_string(SelfVerdict v) {
  switch (v) {
    case SelfVerdict::FullyVerified: return "FullyVerified";
    case SelfVerdict::PartiallyVerified: return "PartiallyVerified";
    case SelfVerdict::Incorrect: return "Incorrect";
  }
  return "Incorrect";
}

std::optional<SelfVerdict> parse_self_verdict(std::string_view s) {
  if (s == "FullyVerified") return SelfVerdict::FullyVerified;
  if (s == "PartiallyVerified") return SelfVerdict::PartiallyVerified;
  if (s == "Incorrect") return SelfVerdict::Incorrect;
  return std::nullopt;
}

std::string_view to_string(JudgeVerdict v) { return v == JudgeVerdict::Correct ? "Correct" : "Incorrect"; }

TrainingExample to_example(const CandidatePair& pair) {
  TrainingExample r;
  r.id = pair.id;
  r.seed = pair.seed;
  r.question = pair.question;
  r.answer = pair.answer;
  r.checklist = pair.checklist;
  r.evidence = pair.evidence;
  if (!pair.raw_output.empty()) r.raw_output = pair.raw_output;
  r.provenance.generator_model = pair.generator_model;
  return r;
}

std::string describe(const Violation& v) {
  std::string s = v.field + ": " + v.rule;
  if (!v.detail.empty()) s += "(" + v.detail + ")";
  return s;
}

std::vector<Violation> validate_example(const TrainingExample& r) {
  std::vector<Violation> out;
  const bool manual = r.provenance.stage == kManualImportStage;
  if (r.id.empty()) out.push_back({"id", "EmptyField", "id"});
  if (text::trim(r.question).empty()) out.push_back({"question", "EmptyField", "question"});
  if (text::trim(r.answer).empty()) out.push_back({"answer", "EmptyField", "answer"});
  if (r.seed) {
    if (text::trim(r.seed->page_title).empty()) out.push_back({"seed.page_title", "EmptyField", "page_title"});
  } else if (!manual) {
    out.push_back({"seed", "MissingSeed", ""});
  }
  check_checklist(r.checklist, r.evidence, out);
  check_evidence(r.evidence, out);
  for (std::size_t i = 0; i < r.external.size(); ++i) {
    const int round = r.external[i].round;
    if (round != 1 && round != 2)
      out.push_back({"external[" + std::to_string(i) + "].round", "InvalidRound", std::to_string(round)});
  }
  if (r.provenance.stage.empty()) out.push_back({"provenance.stage", "EmptyField", "stage"});
  try {
    parse_utc(r.provenance.created_at);
  } catch (const Error&) {
    out.push_back({"provenance.created_at", "InvalidTimestamp", r.provenance.created_at});
  }
  if (manual) {
    if (!r.provenance.annotator || text::trim(*r.provenance.annotator).empty())
      out.push_back({"provenance.annotator", "EmptyField", "annotator"});
    return out;
  }
  if (r.self_verification.verdict != SelfVerdict::FullyVerified) {
    out.push_back({"self_verification.verdict", "NotFullyVerified",
                   r.self_verification.verdict ? std::string(to_string(*r.self_verification.verdict))
                                               : std::string("unclassified")});
  }
  if (text::trim(r.self_verification.report).empty())
    out.push_back({"self_verification.report", "EmptyField", "report"});
  if (r.external.empty()) {
    out.push_back({"external", "MissingExternalVerdict", ""});
  } else if (r.external.back().verdict != JudgeVerdict::Correct) {
    out.push_back({"external", "LastVerdictNotCorrect", std::to_string(r.external.size())});
  }
  return out;
}

std::vector<Violation> example_warnings(const TrainingExample& r, std::size_t answer_token_cap) {
  std::vector<Violation> out;
  const std::size_t n = text::whitespace_tokens(r.answer);
  if (n > answer_token_cap) out.push_back({"answer", "AnswerNotShort", std::to_string(n) + " tokens"});
  return out;
}

std::vector<Violation> validate_candidate(const CandidatePair& p) {
  std::vector<Violation> out;
  if (text::trim(p.question).empty()) out.push_back({"question", "EmptyField", "question"});
  if (text::trim(p.answer).empty()) out.push_back({"answer", "EmptyField", "answer"});
  if (text::trim(p.seed.page_title).empty()) out.push_back({"seed.page_title", "EmptyField", "page_title"});
  check_checklist(p.checklist, p.evidence, out);
  check_evidence(p.evidence, out);
  return out;
}

json parse_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::MalformedJson, e.what());
  }
  if (!j.is_object()) fail(ErrorCode::MalformedJson, "record is not a JSON object");
  return j;
}

ojson seed_to_json(const Seed& s) {
  ojson o;
  o["domain"] = to_string(s.domain);
  o["category"] = s.category;
  o["page_title"] = s.page_title;
  if (s.page_id) o["page_id"] = *s.page_id;
  return o;
}

Seed seed_from_json(const json& j, const std::string& path) {
  Seed s;
  const std::string domain = req_string(j, "domain", path);
  const auto d = parse_domain(domain);
  if (!d) schema(path + "domain");
  s.domain = *d;
  s.category = req_string(j, "category", path);
  s.page_title = req_string(j, "page_title", path);
  if (auto it = j.find("page_id"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) schema(path + "page_id");
    s.page_id = it->get<std::int64_t>();
  }
  return s;
}

ojson example_to_json(const TrainingExample& r) {
  ojson o;
  o["version"] = kRecordVersion;
  o["id"] = r.id;
  o["seed"] = r.seed ? seed_to_json(*r.seed) : ojson(nullptr);
  o["question"] = r.question;
  o["answer"] = r.answer;
  o["checklist"] = checklist_to_json(r.checklist);
  o["evidence"] = evidence_to_json(r.evidence);
  ojson sv;
  sv["report"] = r.self_verification.report;
  sv["verdict"] = r.self_verification.verdict ? ojson(to_string(*r.self_verification.verdict)) : ojson(nullptr);
  sv["revised_answer"] = r.self_verification.revised_answer ? ojson(*r.self_verification.revised_answer) : ojson(nullptr);
  sv["cited_urls"] = r.self_verification.cited_urls;
  o["self_verification"] = std::move(sv);
  ojson ext = ojson::array();
  for (const auto& jr : r.external) {
    ojson e;
    e["round"] = jr.round;
    e["predicted_answer"] = jr.predicted_answer;
    e["verdict"] = to_string(jr.verdict);
    e["rationale"] = jr.rationale;
    ext.push_back(std::move(e));
  }
  o["external"] = std::move(ext);
  ojson prov;
  prov["generator_model"] = r.provenance.generator_model;
  prov["created_at"] = r.provenance.created_at;
  prov["stage"] = r.provenance.stage;
  if (r.provenance.original_answer) prov["original_answer"] = *r.provenance.original_answer;
  if (r.provenance.annotator) prov["annotator"] = *r.provenance.annotator;
  o["provenance"] = std::move(prov);
  if (r.raw_output) o["raw_output"] = *r.raw_output;
  return o;
}

TrainingExample example_from_json(const json& j) {
  TrainingExample r;
  r.question = req_string(j, "question");
  r.answer = req_string(j, "answer");
  r.id = req_string(j, "id");
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) schema("seed");
    r.seed = seed_from_json(*it, "seed.");
  }
  r.checklist = checklist_from_json(req_array(j, "checklist"));
  r.evidence = evidence_from_json(req_array(j, "evidence"));
  const json& sv = req_object(j, "self_verification");
  r.self_verification.report = req_string(sv, "report", "self_verification.");
  if (auto v = opt_string(sv, "verdict", "self_verification.")) {
    r.self_verification.verdict = parse_self_verdict(*v);
    if (!r.self_verification.verdict) schema("self_verification.verdict");
  }
  r.self_verification.revised_answer = opt_string(sv, "revised_answer", "self_verification.");
  for (const auto& u : req_array(sv, "cited_urls", "self_verification.")) {
    if (!u.is_string()) schema("self_verification.cited_urls");
    r.self_verification.cited_urls.push_back(u.get<std::string>());
  }
  const json& ext = req_array(j, "external");
  for (std::size_t i = 0; i < ext.size(); ++i) {
    const std::string path = "external[" + std::to_string(i) + "].";
    if (!ext[i].is_object()) schema("external[" + std::to_string(i) + "]");
    JudgeResult jr;
    jr.round = req_int(ext[i], "round", path);
    jr.predicted_answer = req_string(ext[i], "predicted_answer", path);
    const std::string v = req_string(ext[i], "verdict", path);
    if (v == "Correct") jr.verdict = JudgeVerdict::Correct;
    else if (v == "Incorrect") jr.verdict = JudgeVerdict::Incorrect;
    else schema(path + "verdict");
    jr.rationale = req_string(ext[i], "rationale", path);
    r.external.push_back(std::move(jr));
  }
  const json& prov = req_object(j, "provenance");
  r.provenance.generator_model = req_string(prov, "generator_model", "provenance.");
  r.provenance.created_at = req_string(prov, "created_at", "provenance.");
  r.provenance.stage = req_string(prov, "stage", "provenance.");
  r.provenance.original_answer = opt_string(prov, "original_answer", "provenance.");
  r.provenance.annotator = opt_string(prov, "annotator", "provenance.");
  r.raw_output = opt_string(j, "raw_output");
  check_version(j);
  return r;
}

std::string render_record(const TrainingExample& record) {
  return example_to_json(record).dump(-1, ' ', false, json::error_handler_t::replace);
}

TrainingExample parse_record(std::string_view line) { return example_from_json(parse_json_line(line)); }

std::string render_candidate(const CandidatePair& p) {
  ojson o;
  o["version"] = kRecordVersion;
  o["id"] = p.id;
  o["seed"] = seed_to_json(p.seed);
  o["question"] = p.question;
  o["answer"] = p.answer;
  o["checklist"] = checklist_to_json(p.checklist);
  o["evidence"] = evidence_to_json(p.evidence);
  o["generator_model"] = p.generator_model;
  o["raw_output"] = p.raw_output;
  return o.dump(-1, ' ', false, json::error_handler_t::replace);
}

CandidatePair parse_candidate(std::string_view line) {
  const json j = parse_json_line(line);
  CandidatePair p;
  p.question = req_string(j, "question");
  p.answer = req_string(j, "answer");
  p.id = req_string(j, "id");
  p.seed = seed_from_json(req_object(j, "seed"), "seed.");
  p.checklist = checklist_from_json(req_array(j, "checklist"));
  p.evidence = evidence_from_json(req_array(j, "evidence"));
  p.raw_output = opt_string(j, "raw_output").value_or("");
  p.generator_model = opt_string(j, "generator_model").value_or("");
  check_version(j);
  return p;
}

std::string render_seed(const Seed& seed) {
  ojson o;
  o["version"] = kRecordVersion;
  const ojson body = seed_to_json(seed);
  for (auto it = body.begin(); it != body.end(); ++it) o[it.key()] = it.value();
  return o.dump(-1, ' ', false, json::error_handler_t::replace);
}

Seed parse_seed(std::string_view line) {
  const json j = parse_json_line(line);
  Seed s = seed_from_json(j, "");
  if (text::trim(s.page_title).empty()) schema("page_title");
  check_version(j);
  return s;
}

}  // namespace orbit
