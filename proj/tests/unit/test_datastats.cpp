#include "doctest.h"
#include "orbit/datastats.hpp"
#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/text.hpp"
#include "test_support.hpp"

using namespace orbit;
using orbit::testing::TempDir;
using Entry = ScriptedProvider::Entry;

namespace {

ManualClock& test_clock() {
  static ManualClock c(parse_utc("2025-03-01T00:00:00Z"));
  return c;
}

TrainingExample emoji_movie() {
  return parse_record(io::read_lines(orbit::testing::fixture_path("records/emoji_movie.jsonl")).at(0));
}

TrainingExample with_urls(std::vector<std::string> urls) {
  TrainingExample r;
  r.question = "one two three";
  r.answer = "four";
  r.checklist = {{"a", {1}}, {"b", {1}}};
  int i = 0;
  for (auto& u : urls) r.evidence.push_back({++i, std::move(u)});
  return r;
}

// Counts characters: a deterministic non-whitespace tokenizer.
class CharTokenizer final : public Tokenizer {
 public:
  std::string name() const override { return "chars"; }
  bool approximate() const override { return false; }
  std::vector<std::size_t> count_batch(const std::vector<std::string>& texts) const override {
    std::vector<std::size_t> out;
    for (const auto& t : texts) out.push_back(t.size());
    return out;
  }
};

}  // namespace

TEST_CASE("registrable domains agree with the suffix-list oracle") {
  const auto lines = io::read_lines(orbit::testing::fixture_path("psl/cases.jsonl"));
  REQUIRE(lines.size() > 50);
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK_MESSAGE(registrable_domain(j["host"].get<std::string>()) == j["registrable"].get<std::string>(), line);
  }
  CHECK(registrable_domain("192.168.0.1") == "192.168.0.1");
  CHECK(registrable_domain("[::1]") == "[::1]");
}

TEST_CASE("classify_url") {
  CHECK(classify_url("https://en.wikipedia.org/wiki/X") == "Wikipedia");
  CHECK(classify_url("https://pubmed.ncbi.nlm.nih.gov/123") == "NIH");
  CHECK(classify_url("https://a.b.example.co.uk/p") == "example.co.uk");
  CHECK(classify_url("https://www.sciencedirect.com/science/article/pii/1") == "ScienceDirect");
  CHECK(classify_url("https://www.britannica.com/topic/x") == "Britannica");
  CHECK(classify_url("https://www.imdb.com/title/tt1") == "imdb.com");
  CHECK_THROWS_AS(classify_url("not a url"), Error);
  CHECK_THROWS_AS(classify_url("ftp://example.com/x"), Error);
  CHECK(is_wiki_url("https://de.wikipedia.org/wiki/Y"));
  CHECK_FALSE(is_wiki_url("https://notwikipedia.org/"));
  CHECK_FALSE(is_wiki_url("https://www.wikidata.org/wiki/Q1"));
}

TEST_CASE("compute_stats") {
  WhitespaceTokenizer ws;
  SUBCASE("emoji movie record") {
    const auto r = compute_stats({emoji_movie()}, ws);
    CHECK(r.avg_reasoning_steps == 5.0);
    CHECK(r.n_pairs == 1);
    CHECK(r.tokenizer == "whitespace (approx)");
    CHECK(r.tokenizer_approx);
  }
  SUBCASE("three urls, one wiki") {
    const auto r = compute_stats(
        {with_urls({"https://en.wikipedia.org/wiki/A", "https://www.nasa.gov/x", "https://example.com/y"})}, ws);
    CHECK(r.avg_wiki_urls == 1.0);
    CHECK(r.avg_nonwiki_urls == 2.0);
    CHECK(r.avg_verification_urls == 3.0);
    CHECK(r.avg_question_tokens == 3.0);
    CHECK(r.avg_answer_tokens == 1.0);
    CHECK(r.domain_histogram == Histogram{{"Manual", 1}});
  }
  SUBCASE("empty dataset") {
    const auto r = compute_stats({}, ws);
    CHECK(r.n_pairs == 0);
    CHECK_FALSE(r.avg_question_tokens);
    CHECK_FALSE(r.avg_reasoning_steps);
    CHECK(stats_to_json(r)["avg_verification_urls"].is_null());
  }
  SUBCASE("parallel equals serial and url identity holds") {
    Rng rng(5);
    std::vector<TrainingExample> records;
    for (int i = 0; i < 3000; ++i) records.push_back(orbit::testing::random_valid_record(rng));
    const auto serial = compute_stats_serial(records, ws);
    CHECK(compute_stats(records, ws, 8) == serial);
    CHECK(compute_stats(records, ws, 3) == serial);
    CHECK(std::abs(*serial.avg_wiki_urls + *serial.avg_nonwiki_urls - *serial.avg_verification_urls) < 1e-9);
    std::size_t steps = 0;
    for (const auto& r : records) steps += r.checklist.size();
    CHECK(*serial.avg_reasoning_steps == doctest::Approx(static_cast<double>(steps) / 3000.0));
    // Everything except token averages ignores the tokenizer.
    auto other = compute_stats(records, CharTokenizer{}, 4);
    CHECK(other.avg_question_tokens != serial.avg_question_tokens);
    other.avg_question_tokens = serial.avg_question_tokens;
    other.avg_answer_tokens = serial.avg_answer_tokens;
    other.tokenizer = serial.tokenizer;
    other.tokenizer_approx = serial.tokenizer_approx;
    CHECK(other == serial);
  }
}

TEST_CASE("histograms bucket the long tail") {
  std::map<std::string, std::size_t> counts = {{"Wikipedia", 600}, {"NIH", 300}, {"b.com", 96}, {"c.com", 2}, {"d.com", 2}};
  const auto h = make_histogram(counts, kOthersShare);
  CHECK(h == Histogram{{"Wikipedia", 600}, {"NIH", 300}, {"b.com", 96}, {"Others", 4}});
  CHECK(make_histogram(counts).size() == 5);
}

TEST_CASE("exec tokenizer plugin") {
  TempDir dir;
  const auto script = dir / "count.sh";
  // one count per input line: the JSON string's byte length including quotes
  io::write_file(script, "#!/bin/sh\nwhile IFS= read -r line; do printf '%s\\n' \"${#line}\"; done\n");
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  const auto tok = make_tokenizer("exec:" + script.string());
  CHECK_FALSE(tok->approximate());
  CHECK(tok->count_batch({"ab", "", "abcd"}) == std::vector<std::size_t>{4, 2, 6});
  const auto broken = make_tokenizer("exec:false");
  CHECK_THROWS_AS(broken->count_batch({"x"}), Error);
  CHECK_THROWS_AS(make_tokenizer("bpe"), Error);
  CHECK(make_tokenizer("approx")->approximate());
}

TEST_CASE("answer type and hop parsing") {
  CHECK(parse_answer_type("Reasoning...\nTYPE: Numeric / Quantitative") == "Numeric / Quantitative");
  CHECK(parse_answer_type("**TYPE: named artifact/system**\n") == "Named Artifact / System");
  CHECK_THROWS_AS(parse_answer_type("TYPE: Banana"), Error);
  CHECK_THROWS_AS(parse_answer_type("TYPE: Person\nmore text"), Error);
  CHECK(answer_types().size() == 9);

  CHECK(parse_subquestion_list("1. a\n2. b\n3. c\n4. d\n5. e") == 5);
  CHECK(parse_subquestion_list("Sub-questions:\n1) only one") == 1);
  try {
    parse_subquestion_list("It takes a few steps to answer this.");
    FAIL("expected UnparseableList");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnparseableList);
  }
  CHECK_THROWS_AS(parse_subquestion_list("1. a\n3. b"), Error);
}

TEST_CASE("LLM labels") {
  Gateway gw(test_clock());
  const auto templates = TemplateSet::builtin();
  auto labeler = std::make_shared<ScriptedProvider>(
      "labeler", std::vector<Entry>{{Entry::Match::Contains, "ANSWER: 86 minutes", "Runtime.\nTYPE: Numeric / Quantitative", ""},
                                    {Entry::Match::Contains, "ANSWER: The Immense Journey", "TYPE: Banana", ""},
                                    {Entry::Match::Contains, "ANSWER: The Immense Journey", "A book.\nTYPE: Named Artifact / System", ""}});
  auto decomposer = std::make_shared<ScriptedProvider>(
      "decomposer", std::vector<Entry>{{Entry::Match::Contains, "runtime", "1. a\n2. b\n3. c\n4. d\n5. e", ""},
                                       {Entry::Match::Contains, "sunfish", "I cannot decompose this.", ""}});
  gw.add(ProviderProfile{.name = "labeler"}, labeler);
  gw.add(ProviderProfile{.name = "decomposer"}, decomposer);
  const LabelConfig cfg;

  const auto emoji = emoji_movie();
  CHECK(classify_answer_type(emoji, gw, templates, cfg) == "Numeric / Quantitative");
  CHECK(decompose_complexity(emoji.question, gw, templates, cfg) == 5);

  TrainingExample book;
  book.id = "book";
  book.question = "Which sunfish book?";
  book.answer = "The Immense Journey";
  CHECK(classify_answer_type(book, gw, templates, cfg) == "Named Artifact / System");  // after one re-ask
  CHECK(gw.call_count("labeler") == 3);
  CHECK_THROWS_AS(decompose_complexity(book.question, gw, templates, cfg), Error);
}

TEST_CASE("label_records dead-letters and attaches histograms") {
  Gateway gw(test_clock());
  const auto templates = TemplateSet::builtin();
  gw.add(ProviderProfile{.name = "labeler"},
         std::make_shared<ScriptedProvider>("labeler", std::vector<Entry>{{Entry::Match::Contains, "ANSWER: 86", "TYPE: Numeric / Quantitative", ""},
                                                                          {Entry::Match::Any, "", "TYPE: ?", ""},
                                                                          {Entry::Match::Any, "", "TYPE: ??", ""}}));
  gw.add(ProviderProfile{.name = "decomposer"},
         std::make_shared<ScriptedProvider>("decomposer", std::vector<Entry>{{Entry::Match::Any, "", "1. x\n2. y", ""},
                                                                             {Entry::Match::Any, "", "1. z", ""}}));
  TempDir dir;
  TrainingExample other = with_urls({});
  other.id = "other";
  const auto labels = label_records({emoji_movie(), other}, gw, templates, LabelConfig{}, dir / "dead.jsonl");
  CHECK(labels.answer_types == std::map<std::string, std::size_t>{{"Numeric / Quantitative", 1}});
  CHECK(labels.dead_lettered == 1);
  CHECK(io::read_lines(dir / "dead.jsonl").size() == 1);
  StatsReport report = compute_stats({emoji_movie(), other}, WhitespaceTokenizer{});
  attach_labels(report, labels);
  CHECK(report.complexity_histogram == Histogram{{"1", 1}, {"2", 1}});
}

TEST_CASE("emit_report") {
  TempDir dir;
  auto report = compute_stats({emoji_movie(), with_urls({"https://x.example.com/a", "https://en.wikipedia.org/wiki/B"})},
                              WhitespaceTokenizer{});
  report.answer_type_histogram = Histogram{{"Person", 3}, {"Temporal, \"quoted\"", 1}};
  emit_report(report, dir / "stats");
  for (const char* f : {"stats.json", "domains.csv", "url_sources.csv", "answer_types.csv", "complexity.csv"})
    CHECK(std::filesystem::exists(dir / "stats" / f));
  CHECK(load_histogram_csv(dir / "stats" / "url_sources.csv") == report.url_source_histogram);
  CHECK(load_histogram_csv(dir / "stats" / "domains.csv") == report.domain_histogram);
  CHECK(load_histogram_csv(dir / "stats" / "answer_types.csv") == *report.answer_type_histogram);
  CHECK(load_histogram_csv(dir / "stats" / "complexity.csv").empty());
  const auto j = nlohmann::json::parse(io::read_file(dir / "stats" / "stats.json"));
  CHECK(j["n_pairs"] == 2);

  emit_report(compute_stats({}, WhitespaceTokenizer{}), dir / "empty");
  CHECK(nlohmann::json::parse(io::read_file(dir / "empty" / "stats.json"))["avg_question_tokens"].is_null());
}

TEST_CASE("loose dataset rows") {
  TempDir dir;
  io::write_file(dir / "d.jsonl",
                 io::read_file(orbit::testing::fixture_path("records/emoji_movie.jsonl")) +
                     R"({"question":"q words here","answer":"a","checklist":["x","y","z"],"urls":["https://en.wikipedia.org/wiki/Z"],"domain":"Music"})"
                     "\n");
  const auto records = load_stats_records(dir / "d.jsonl");
  REQUIRE(records.size() == 2);
  CHECK(records[1].checklist.size() == 3);
  const auto r = compute_stats(records, WhitespaceTokenizer{});
  CHECK(r.avg_reasoning_steps == 4.0);
  io::write_file(dir / "bad.jsonl", R"({"answer":"a"})" "\n");
  CHECK_THROWS_AS(load_stats_records(dir / "bad.jsonl"), Error);
}
