#include <doctest.h>

#include <fstream>
#include <map>

#include "cli.hpp"
#include "orbit/io.hpp"
#include "orbit/model.hpp"
#include "pipeline_driver.hpp"
#include "test_support.hpp"

using namespace orbit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) { return cli::run_cli(args); }

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({}) == cli::kConfigError);
  CHECK(run({"frobnicate"}) == cli::kConfigError);
  CHECK(run({"validate"}) == cli::kConfigError);
  CHECK(run({"validate", "--in", "x", "--bogus"}) == cli::kConfigError);
}

TEST_CASE("a bad config file exits 2") {
  testing::TempDir dir;
  io::write_file(dir / "c.json", R"({"genesis":{"max_attemps":3}})");
  io::write_file(dir / "seeds.jsonl", "");
  CHECK(run({"--config", (dir / "c.json").string(), "generate", "--seeds", (dir / "seeds.jsonl").string(), "--out",
             (dir / "o.jsonl").string()}) == cli::kConfigError);
  CHECK(run({"--fixed-time", "yesterday", "validate", "--in", (dir / "seeds.jsonl").string()}) == cli::kConfigError);
}

TEST_CASE("a missing input is fatal") {
  testing::TempDir dir;
  CHECK(run({"validate", "--in", (dir / "absent.jsonl").string()}) == cli::kFatal);
}

TEST_CASE("validate reports invalid records with exit 1") {
  testing::TempDir dir;
  Rng rng(5);
  std::string clean;
  for (int i = 0; i < 20; ++i) clean += render_record(testing::random_valid_record(rng)) + "\n";
  io::write_file(dir / "clean.jsonl", clean);
  CHECK(run({"--manifest", (dir / "m.json").string(), "validate", "--in", (dir / "clean.jsonl").string()}) ==
        cli::kOk);
  CHECK(read_json(dir / "m.json")["counts"]["invalid"] == 0);

  auto broken = testing::random_valid_record(rng);
  broken.evidence.clear();
  io::write_file(dir / "dirty.jsonl", clean + render_record(broken) + "\n");
  CHECK(run({"--manifest", (dir / "m2.json").string(), "validate", "--in", (dir / "dirty.jsonl").string()}) ==
        cli::kPartial);
  const auto m = read_json(dir / "m2.json");
  CHECK(m["counts"]["records"] == 21);
  CHECK(m["counts"]["invalid"] == 1);
  CHECK(m["exit_code"] == 1);
}

TEST_CASE("generate dead-letters provider refusals, exits 1 and records counts") {
  testing::TempDir dir;
  io::write_file(dir / "scenario.json", R"({"entries":[{"match":{"any":true},"error":"refusal"}]})");
  io::write_file(dir / "config.json",
                 R"({"profiles":[{"name":"generator","model":"m","scenario":"scenario.json"}],
                     "genesis":{"profile":"generator"}})");
  io::write_file(dir / "seeds.jsonl",
                 render_seed({Domain::Art, "Category:Essays", "The Sea Around Us", std::nullopt}) + "\n");
  const int code = run({"--config", (dir / "config.json").string(), "--fixed-time", "2025-03-01T00:00:00Z",
                        "generate", "--seeds", (dir / "seeds.jsonl").string(), "--out", (dir / "out.jsonl").string()});
  CHECK(code == cli::kPartial);
  const auto m = read_json(dir / "out.jsonl.manifest.json");
  CHECK(m["version"] == "orbit-manifest/1");
  CHECK(m["command"] == "generate");
  CHECK(m["counts"]["dead_lettered"] == 1);
  CHECK(m["counts"]["produced"] == 0);
  CHECK(m["config_hash"].get<std::string>().size() == 64);
  CHECK(m["created_at"] == "2025-03-01T00:00:00Z");
  CHECK(m["inputs"][0]["path"] == "seeds.jsonl");
  CHECK(io::read_lines(dir / "out.dead.jsonl").size() == 1);
}

TEST_CASE("--replay refuses live model profiles") {
  testing::TempDir dir;
  io::write_file(dir / "config.json",
                 R"({"profiles":[{"name":"generator","kind":"openai-compat","model":"m","base_url":"http://127.0.0.1:9"}],
                     "genesis":{"profile":"generator"}})");
  io::write_file(dir / "seeds.jsonl", "");
  CHECK(run({"--config", (dir / "config.json").string(), "--replay", "generate", "--seeds",
             (dir / "seeds.jsonl").string(), "--out", (dir / "o.jsonl").string()}) == cli::kConfigError);
}

TEST_CASE("pipeline fixture end to end through the CLI") {
  testing::TempDir a;
  testing::TempDir b;
  const fs::path fixtures = ORBIT_FIXTURES_DIR;
  for (const auto& r : testing::run_pipeline_fixture(fixtures, a.path(), 4)) {
    INFO(r.command);
    CHECK(r.exit_code == 0);
  }
  const auto expected = read_json(fixtures / "pipeline/expected.json");
  CHECK(io::read_lines(a / "seeds.jsonl").size() == expected["seeds"].get<std::size_t>());
  CHECK(io::read_lines(a / "candidates.jsonl").size() == expected["candidates"].get<std::size_t>());
  CHECK(io::read_lines(a / "self_verified.jsonl").size() == expected["self_verified"].get<std::size_t>());
  const auto final_lines = io::read_lines(a / "dataset.jsonl");
  REQUIRE(final_lines.size() == expected["accepted"].get<std::size_t>());
  std::vector<std::string> titles;
  for (const auto& l : final_lines) titles.push_back(parse_record(l).seed->page_title);
  CHECK(titles == expected["final_seeds"].get<std::vector<std::string>>());
  const auto m = read_json(a / "dataset.jsonl.manifest.json");
  CHECK(m["counts"]["accepted_in_round"] == expected["accepted_in_round"]);

  for (const auto& r : testing::run_pipeline_fixture(fixtures, b.path(), 1)) CHECK(r.exit_code == 0);
  const auto ta = tree_contents(a.path());
  const auto tb = tree_contents(b.path());
  CHECK(ta.size() == tb.size());
  for (const auto& [name, body] : ta) {
    INFO(name);
    REQUIRE(tb.count(name) == 1);
    CHECK(tb.at(name) == body);
  }
}

TEST_CASE("run and eval replay the agent fixture") {
  testing::TempDir dir;
  const fs::path fixtures = ORBIT_FIXTURES_DIR;
  const std::string config = (fixtures / "agent/cli/config.json").string();
  const std::string questions = (fixtures / "agent/cli/frames.jsonl").string();
  CHECK(run({"--config", config, "--replay", "--log-level", "error", "eval", "--datasets", questions, "--report",
             (dir / "report.json").string()}) == cli::kOk);
  const auto report = read_json(dir / "report.json");
  CHECK(report["datasets"][0]["dataset"] == "frames");
  CHECK(report["datasets"][0]["em"] == 100.0);
  CHECK(report["macro_average"] == 100.0);
  CHECK(io::read_lines(dir / "report.items.jsonl").size() == 1);
}

TEST_CASE("mix writes the requested allocation") {
  testing::TempDir dir;
  io::write_file(dir / "a.jsonl", R"({"id":"a1","question":"q1","golds":["x"]}
{"id":"a2","question":"q2","golds":["y"]}
{"id":"a3","question":"q3","golds":["z"]}
)");
  io::write_file(dir / "b.jsonl", R"({"id":"b1","question":"q4","golds":["w"]}
)");
  io::write_file(dir / "spec.json", R"({"parts":[{"path":"a.jsonl","weight":2},{"path":"b.jsonl","weight":1}],
                                       "total":3,"seed":9})");
  CHECK(run({"mix", "--spec", (dir / "spec.json").string(), "--out", (dir / "mix.jsonl").string()}) == cli::kOk);
  CHECK(io::read_lines(dir / "mix.jsonl").size() == 3);
  CHECK(read_json(dir / "mix.jsonl.manifest.json")["counts"]["per_dataset"] == json{{"a", 2}, {"b", 1}});
  CHECK(run({"mix", "--spec", (dir / "spec.json").string(), "--total", "9", "--out",
             (dir / "too_many.jsonl").string()}) != cli::kOk);
}
