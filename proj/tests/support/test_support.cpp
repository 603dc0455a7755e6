#include "test_support.hpp"

#include <atomic>
#include <set>

#include "orbit/clock.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"

namespace orbit::testing {

TempDir::TempDir() {
  static std::atomic<unsigned> counter{0};
  Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()) ^ counter++);
  path_ = std::filesystem::temp_directory_path() / ("orbit-test-" + std::to_string(rng.next() % 1000000000ULL));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string random_text(Rng& rng, std::size_t max_len) {
  static const std::vector<char32_t> pool = {'a',    'b',    'Z',    '0',    '9',    ' ',    ' ',    '\t',
                                             '\n',   '"',    '\\',   '/',    '<',    '>',    '&',    '\'',
                                             '{',    '}',    ':',    ',',    '[',    ']',    0xE9,   0xDF,
                                             0x4E2D, 0x6587, 0x1F600, 0x2014, 0xA0,   0x7F,   0x01,   '.'};
  std::string out;
  const std::size_t n = rng.index(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) text::append_utf8(out, pool[rng.index(pool.size())]);
  return out;
}

std::string random_phrase(Rng& rng, std::size_t max_words) {
  static const std::vector<std::string> words = {"river", "Émile", "1957", "essay", "sunfish", "Wyoming", "中文",
                                                 "x&y",   "a<b",   "O'Neil", "\"quoted\"", "naïve", "🎬",   "(paren)",
                                                 "k=v",   "50%",   "the",  "cite", "#3", "Zürich"};
  const std::size_t n = 1 + rng.index(max_words);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += words[rng.index(words.size())];
  }
  return out;
}

std::string random_bytes(Rng& rng, std::size_t max_len) {
  std::string out;
  const std::size_t n = rng.index(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(rng.index(256)));
  return out;
}

Seed random_seed(Rng& rng) {
  Seed s;
  s.domain = all_domains()[rng.index(kDomainCount)];
  s.category = "Category:" + random_phrase(rng, 3);
  s.page_title = random_phrase(rng, 4);
  if (rng.index(2)) s.page_id = static_cast<std::int64_t>(rng.index(10000000)) + 1;
  return s;
}

namespace {

std::vector<EvidenceRef> random_evidence(Rng& rng, std::size_t n) {
  std::set<int> used;
  std::vector<EvidenceRef> out;
  while (out.size() < n) {
    const int idx = 1 + static_cast<int>(rng.index(12));
    if (!used.insert(idx).second) continue;
    static const std::vector<std::string> hosts = {"en.wikipedia.org", "www.britannica.com", "pubmed.ncbi.nlm.nih.gov",
                                                   "example.co.uk", "imdb.com"};
    out.push_back({idx, "https://" + hosts[rng.index(hosts.size())] + "/wiki/P" + std::to_string(rng.index(100000)) +
                            (rng.index(3) == 0 ? "?q=a&b=" + std::to_string(rng.index(50)) : "")});
  }
  return out;
}

std::vector<ChecklistItem> random_checklist(Rng& rng, const std::vector<EvidenceRef>& ev, bool phrases) {
  std::vector<ChecklistItem> out(1 + rng.index(6));
  for (auto& item : out) {
    item.text = phrases ? random_phrase(rng, 8) : random_text(rng, 40) + "x";
    const std::size_t k = 1 + rng.index(3);
    for (std::size_t i = 0; i < k; ++i) item.cites.push_back(ev[rng.index(ev.size())].index);
  }
  return out;
}

}  // namespace

CandidatePair random_candidate(Rng& rng) {
  CandidatePair p;
  p.seed = random_seed(rng);
  p.question = random_phrase(rng, 20);
  p.answer = random_phrase(rng, 3);
  p.evidence = random_evidence(rng, 1 + rng.index(7));
  p.checklist = random_checklist(rng, p.evidence, true);
  p.id = make_pair_id(p.seed.page_title, p.question);
  return p;
}

TrainingExample random_valid_record(Rng& rng) {
  TrainingExample r;
  r.seed = random_seed(rng);
  r.question = random_text(rng, 60) + "?";
  r.answer = "A" + random_text(rng, 10);
  r.id = make_pair_id(r.seed->page_title, r.question);
  r.evidence = random_evidence(rng, 1 + rng.index(7));
  r.checklist = random_checklist(rng, r.evidence, false);
  if (rng.index(2)) r.raw_output = random_text(rng, 80);
  r.self_verification.report = "report " + random_text(rng, 80);
  r.self_verification.verdict = SelfVerdict::FullyVerified;
  if (rng.index(2)) r.self_verification.revised_answer = random_text(rng, 10);
  for (std::size_t i = rng.index(3); i > 0; --i) r.self_verification.cited_urls.push_back(r.evidence[0].url);
  const bool two_rounds = rng.index(2);
  if (two_rounds) r.external.push_back({1, random_text(rng, 30), JudgeVerdict::Incorrect, random_text(rng, 30)});
  r.external.push_back({two_rounds ? 2 : 1, random_text(rng, 30), JudgeVerdict::Correct, random_text(rng, 30)});
  r.provenance.generator_model = "gen-" + std::to_string(rng.index(10));
  r.provenance.created_at = format_utc(Clock::time_point{} + std::chrono::seconds(1600000000 + rng.index(100000000)));
  r.provenance.stage = "external-verified";
  if (rng.index(3) == 0) r.provenance.original_answer = random_text(rng, 10);
  return r;
}

std::filesystem::path fixture_path(const std::string& relative) {
  return std::filesystem::path(ORBIT_FIXTURES_DIR) / relative;
}

std::string read_fixture(const std::string& relative) { return io::read_file(fixture_path(relative)); }

}  // namespace orbit::testing
