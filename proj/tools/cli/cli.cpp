#include "cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "orbit/config.hpp"
#include "orbit/datastats.hpp"
#include "orbit/error.hpp"
#include "orbit/evalbench.hpp"
#include "orbit/hash.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/parallel.hpp"
#include "orbit/text.hpp"

namespace orbit::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kManifestVersion = "orbit-manifest/1";

// Used under --replay without fixture routes: nothing may reach the network.
class OfflineTransport final : public HttpTransport {
 public:
  HttpResponse send(const HttpRequest& req) override {
    fail(ErrorCode::ReplayMiss, "network disabled by --replay: " + req.url);
  }
};

struct GlobalOptions {
  std::string config;
  int workers = 0;
  bool replay = false;
  std::string fixed_time;
  std::string manifest;
  std::string log_level = "info";
};

// Shared state for one invocation, built after argument parsing.
class Runtime {
 public:
  explicit Runtime(const GlobalOptions& g) : options_(g) {
    if (!g.config.empty()) {
      config_ = load_pipeline_config(g.config);
      config_hash_ = config_hash(config_.raw);
    } else {
      config_ = parse_pipeline_config(nlohmann::json::object(), fs::current_path());
    }
    if (g.fixed_time.empty()) {
      clock_ = std::make_unique<SystemClock>();
    } else {
      try {
        clock_ = std::make_unique<FrozenStampClock>(parse_utc(g.fixed_time));
      } catch (const Error&) {
        fail(ErrorCode::ConfigError, "--fixed-time: " + g.fixed_time);
      }
    }
    workers_ = g.workers > 0 ? g.workers : default_workers();
    if (!config_.fixture_routes.empty()) {
      auto fixture = std::make_shared<FixtureTransport>(clock_.get());
      for (const auto& r : config_.fixture_routes) fixture->load_routes(r);
      transport_ = fixture;
    } else if (g.replay) {
      transport_ = std::make_shared<OfflineTransport>();
    } else {
      transport_ = std::make_shared<CurlTransport>();
    }
    templates_ = TemplateSet::builtin();
    if (config_.templates_dir) templates_.load_dir(*config_.templates_dir);
  }

  const PipelineConfig& config() const { return config_; }
  PipelineConfig& config() { return config_; }
  const std::optional<std::string>& hash() const { return config_hash_; }
  Clock& clock() { return *clock_; }
  int workers() const { return workers_; }
  bool replay() const { return options_.replay; }
  HttpTransport& transport() { return *transport_; }
  const TemplateSet& templates() const { return templates_; }

  Gateway& gateway() {
    if (!gateway_) {
      nlohmann::json cfg;
      cfg["profiles"] = config_.profiles;
      try {
        gateway_ = Gateway::from_config(cfg, config_.base_dir, *clock_, transport_);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, std::string("profiles: ") + e.what());
      }
    }
    return *gateway_;
  }

  /// Every named profile must exist; under --replay only scripted ones may run.
  void require_profiles(const std::vector<std::string>& names) {
    auto& gw = gateway();
    for (const auto& n : names) {
      if (!gw.has(n)) fail(ErrorCode::ConfigError, "profile not configured: " + n);
      if (replay() && gw.profile(n).kind != "scripted")
        fail(ErrorCode::ConfigError, "--replay cannot run live profile " + n);
    }
  }

  std::unique_ptr<MetaSearch> searcher(const std::string& cache_override) {
    MetaSearchOptions opts = config_.search_options;
    std::shared_ptr<SearchCache> cache;
    std::optional<fs::path> cache_path = config_.search_cache;
    if (!cache_override.empty()) {
      cache_path = fs::path(cache_override);
      if (opts.cache_mode == CacheMode::Off) opts.cache_mode = CacheMode::Record;
    }
    if (replay()) opts.cache_mode = CacheMode::Replay;
    if (opts.cache_mode != CacheMode::Off) {
      if (!cache_path) fail(ErrorCode::ConfigError, "search cache mode needs a cache file");
      cache = std::make_shared<SearchCache>(*cache_path);
    }
    std::vector<std::shared_ptr<SearchBackend>> backends;
    try {
      backends = backends_from_config(config_.search, config_.base_dir, transport_);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ConfigError, std::string("search.backends: ") + e.what());
    }
    return std::make_unique<MetaSearch>(std::move(backends), *clock_, opts, std::move(cache));
  }

 private:
  GlobalOptions options_;
  PipelineConfig config_;
  std::optional<std::string> config_hash_;
  std::unique_ptr<Clock> clock_;
  int workers_ = 1;
  std::shared_ptr<HttpTransport> transport_;
  std::unique_ptr<Gateway> gateway_;
  TemplateSet templates_;
};

// Inputs, outputs and counts of one run, written next to the primary output.
struct Manifest {
  std::string command;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  ojson counts = ojson::object();
  fs::path path;
};

fs::path relative_to(const fs::path& p, const fs::path& dir) {
  const auto rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(dir).lexically_normal());
  return rel.empty() ? p : rel;
}

std::size_t count_lines(const fs::path& p) {
  std::size_t n = 0;
  for (char c : io::read_file(p)) n += c == '\n';
  return n;
}

void write_manifest(const Manifest& m, Runtime& rt, int exit_code) {
  const fs::path dir = m.path.parent_path().empty() ? fs::path(".") : m.path.parent_path();
  ojson j;
  j["version"] = kManifestVersion;
  j["command"] = m.command;
  j["config_hash"] = rt.hash() ? ojson(*rt.hash()) : ojson();
  j["created_at"] = format_utc(rt.clock().now());
  j["inputs"] = ojson::array();
  for (const auto& p : m.inputs) {
    ojson e;
    e["path"] = relative_to(p, dir).generic_string();
    if (fs::is_regular_file(p)) e["sha256"] = sha256_hex(io::read_file(p));
    j["inputs"].push_back(e);
  }
  j["outputs"] = ojson::array();
  for (const auto& p : m.outputs) {
    if (!fs::is_regular_file(p)) continue;
    ojson e;
    e["path"] = relative_to(p, dir).generic_string();
    e["sha256"] = sha256_hex(io::read_file(p));
    e["lines"] = count_lines(p);
    j["outputs"].push_back(e);
  }
  j["counts"] = m.counts;
  j["exit_code"] = exit_code;
  io::write_file(m.path, j.dump(2) + "\n");
}

// "<dir>/<stem>.<tag>.jsonl" next to `out`.
fs::path sibling(const fs::path& out, const std::string& tag) {
  return out.parent_path() / (out.stem().string() + "." + tag + ".jsonl");
}

fs::path manifest_for(const GlobalOptions& g, const fs::path& primary) {
  if (!g.manifest.empty()) return g.manifest;
  return primary.parent_path() / (primary.filename().string() + ".manifest.json");
}

void print_summary(const ojson& j) { std::cout << j.dump() << std::endl; }

template <typename T, typename Parse>
std::vector<T> read_jsonl(const fs::path& path, Parse parse) {
  std::vector<T> out;
  for (const auto& line : io::read_lines(path)) out.push_back(parse(line));
  return out;
}

std::vector<std::string> evidence_urls(const std::vector<TrainingExample>& records) {
  std::vector<std::string> urls;
  std::set<std::string> seen;
  for (const auto& r : records)
    for (const auto& ev : r.evidence)
      if (seen.insert(ev.url).second) urls.push_back(ev.url);
  return urls;
}

// ---- subcommands -----------------------------------------------------------

struct HarvestArgs {
  std::string catalog, out, sources;
  std::optional<std::size_t> budget;
  std::optional<int> recursion;
};

int cmd_harvest(Runtime& rt, const GlobalOptions& g, const HarvestArgs& a) {
  const fs::path out = a.out;
  const fs::path sources = a.sources.empty() ? sibling(out, "sources") : fs::path(a.sources);
  Manifest m{"harvest", {a.catalog}, {out, sources}, ojson::object(), manifest_for(g, out)};
  if (!g.config.empty()) m.inputs.push_back(g.config);
  const auto catalog = load_catalog(a.catalog);
  HostRateLimiter limiter(rt.clock(), rt.config().harvest_interval);
  WikiApiClient client(rt.transport(), limiter, rt.clock(), rt.config().wiki);
  HarvestLimits limits = rt.config().harvest;
  if (a.budget) limits.global_budget = *a.budget;
  if (a.recursion) limits.recursion_depth = *a.recursion;
  limits.workers = rt.workers();
  const auto batch = harvest(catalog, client, limits, rt.clock());
  std::string seeds_out, log_out;
  for (const auto& s : batch.seeds) seeds_out += render_seed(s) + "\n";
  for (const auto& e : batch.source_log) log_out += render_source_entry(e) + "\n";
  io::write_file(out, seeds_out);
  io::write_file(sources, log_out);
  std::size_t failed = 0;
  for (const auto& e : batch.source_log) failed += e.page_count < 0;
  m.counts = {{"categories", catalog.size()}, {"failed_categories", failed}, {"seeds", batch.seeds.size()}};
  const int code = failed ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct GenerateArgs {
  std::string seeds, out, discards, dead_letters, profile;
  std::optional<std::size_t> min_evidence;
  std::optional<int> max_attempts;
  std::optional<std::uint64_t> rng_seed;
};

int cmd_generate(Runtime& rt, const GlobalOptions& g, const GenerateArgs& a) {
  GenerationPolicy policy = rt.config().genesis;
  if (!a.profile.empty()) policy.profile = a.profile;
  if (a.min_evidence) policy.min_evidence = *a.min_evidence;
  if (a.max_attempts) {
    if (*a.max_attempts <= 0) fail(ErrorCode::ConfigError, "--max-attempts must be positive");
    policy.max_attempts = *a.max_attempts;
  }
  if (a.rng_seed) policy.rng_seed = *a.rng_seed;
  policy.workers = rt.workers();
  rt.require_profiles({policy.profile});
  const fs::path out = a.out;
  const Stage2Paths paths{out, a.discards.empty() ? sibling(out, "discards") : fs::path(a.discards),
                          a.dead_letters.empty() ? sibling(out, "dead") : fs::path(a.dead_letters)};
  Manifest m{"generate", {a.seeds}, {paths.candidates, paths.discards, paths.dead_letters}, ojson::object(),
             manifest_for(g, out)};
  if (!g.config.empty()) m.inputs.push_back(g.config);
  const auto seeds = read_jsonl<Seed>(a.seeds, parse_seed);
  const auto s = run_stage2(seeds, rt.gateway(), rt.templates(), policy, paths);
  m.counts = {{"input", s.input},         {"skipped", s.skipped},
              {"produced", s.produced},   {"discarded", s.discarded},
              {"dead_lettered", s.dead_lettered}};
  const int code = s.dead_lettered ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct VerifySelfArgs {
  std::string in, out, rejected, dead_letters;
};

int cmd_verify_self(Runtime& rt, const GlobalOptions& g, const VerifySelfArgs& a) {
  SelfVerifyPolicy policy = rt.config().self_verify;
  policy.workers = rt.workers();
  rt.require_profiles({policy.verifier_profile, policy.classifier_profile});
  const fs::path out = a.out;
  const Stage3Paths paths{out, a.rejected.empty() ? sibling(out, "rejected") : fs::path(a.rejected),
                          a.dead_letters.empty() ? sibling(out, "dead") : fs::path(a.dead_letters)};
  Manifest m{"verify-self", {a.in}, {paths.verified, paths.rejected, paths.dead_letters}, ojson::object(),
             manifest_for(g, out)};
  if (!g.config.empty()) m.inputs.push_back(g.config);
  const auto candidates = read_jsonl<CandidatePair>(a.in, parse_candidate);
  const auto s = run_stage3(candidates, rt.gateway(), rt.templates(), policy, paths, rt.clock());
  m.counts = {{"input", s.input},
              {"skipped", s.skipped},
              {"kept", s.kept},
              {"rejected", s.rejected},
              {"dead_lettered", s.dead_lettered},
              {"full", s.full},
              {"partial", s.partial},
              {"incorrect", s.incorrect},
              {"retention", s.retention ? ojson(round1(*s.retention * 100.0)) : ojson()}};
  const int code = s.dead_lettered ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct FetchArgs {
  std::string in, cache;
};

std::map<std::string, FetchResult> fetch_all(Runtime& rt, const std::vector<std::string>& urls, const WebCache& cache) {
  HostRateLimiter limiter(rt.clock(), rt.config().fetch.per_host_interval);
  Fetcher fetcher(rt.transport(), limiter, rt.clock(), rt.config().fetch);
  return fetch_documents(urls, rt.replay() ? nullptr : &fetcher, cache, {rt.replay(), rt.workers()});
}

int cmd_fetch(Runtime& rt, const GlobalOptions& g, const FetchArgs& a) {
  const fs::path cache_dir = a.cache;
  Manifest m{"fetch-evidence", {a.in}, {}, ojson::object(), manifest_for(g, cache_dir / "fetch")};
  const auto records = read_jsonl<TrainingExample>(a.in, parse_record);
  const auto urls = evidence_urls(records);
  const auto results = fetch_all(rt, urls, WebCache(cache_dir));
  std::size_t live = 0;
  ojson failures = ojson::object();
  for (const auto& u : urls) {
    const auto& r = results.at(u);
    if (r.doc) ++live;
    else failures[u] = r.error;
  }
  m.counts = {{"records", records.size()}, {"urls", urls.size()}, {"live", live}, {"failed", urls.size() - live},
              {"failures", failures}};
  write_manifest(m, rt, kOk);
  print_summary(m.counts);
  return kOk;
}

struct VerifyExternalArgs {
  std::string in, cache, out, rejected, dead_letters;
};

int cmd_verify_external(Runtime& rt, const GlobalOptions& g, const VerifyExternalArgs& a) {
  CascadeConfig config = rt.config().cascade;
  config.workers = rt.workers();
  rt.require_profiles(config.round_profiles);
  const auto records = read_jsonl<TrainingExample>(a.in, parse_record);
  std::set<std::string> generator_models;
  if (rt.gateway().has(rt.config().genesis.profile))
    generator_models.insert(rt.gateway().profile(rt.config().genesis.profile).model);
  for (const auto& r : records)
    if (!r.provenance.generator_model.empty()) generator_models.insert(r.provenance.generator_model);
  validate_cascade_config(config, rt.gateway(), generator_models);

  const fs::path out = a.out;
  const Stage4Paths paths{out, a.rejected.empty() ? sibling(out, "rejected") : fs::path(a.rejected),
                          a.dead_letters.empty() ? sibling(out, "dead") : fs::path(a.dead_letters)};
  Manifest m{"verify-external", {a.in}, {paths.accepted, paths.rejected, paths.dead_letters}, ojson::object(),
             manifest_for(g, out)};
  if (!g.config.empty()) m.inputs.push_back(g.config);
  const auto docs = live_documents(fetch_all(rt, evidence_urls(records), WebCache(a.cache)));
  const auto s = run_stage4(records, docs, rt.gateway(), rt.templates(), config, paths, rt.clock());
  m.counts = {{"input", s.input},
              {"skipped", s.skipped},
              {"accepted", s.accepted},
              {"rejected", s.rejected},
              {"dead_lettered", s.dead_lettered},
              {"no_evidence", s.no_evidence},
              {"accepted_in_round", s.accepted_in_round}};
  const int code = s.dead_lettered ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct ImportArgs {
  std::string in, out;
  bool append = false;
};

int cmd_import(Runtime& rt, const GlobalOptions& g, const ImportArgs& a) {
  const fs::path out = a.out;
  Manifest m{"import-manual", {a.in}, {out}, ojson::object(), manifest_for(g, out)};
  const auto records = import_manual(a.in, rt.clock());
  std::set<std::string> existing;
  if (a.append)
    for (const auto& line : io::read_lines(out, true)) existing.insert(parse_record(line).id);
  std::vector<std::string> lines;
  std::size_t duplicates = 0;
  for (const auto& r : records) {
    if (!existing.insert(r.id).second) {
      ++duplicates;
      continue;
    }
    lines.push_back(render_record(r));
  }
  if (a.append) {
    io::append_lines(out, lines);
  } else {
    std::string body;
    for (const auto& l : lines) body += l + "\n";
    io::write_file(out, body);
  }
  m.counts = {{"rows", records.size()}, {"written", lines.size()}, {"duplicates", duplicates}};
  write_manifest(m, rt, kOk);
  print_summary(m.counts);
  return kOk;
}

struct StatsArgs {
  std::string in, out, tokenizer = "approx", llm_labels = "off";
  std::optional<std::size_t> label_sample;
  std::uint64_t seed = 0;
};

int cmd_stats(Runtime& rt, const GlobalOptions& g, const StatsArgs& a) {
  if (a.llm_labels != "on" && a.llm_labels != "off") fail(ErrorCode::ConfigError, "--llm-labels must be on or off");
  const fs::path out = a.out;
  Manifest m{"stats", {a.in}, {out / "stats.json"}, ojson::object(),
             g.manifest.empty() ? out / "manifest.json" : fs::path(g.manifest)};
  const auto tokenizer = make_tokenizer(a.tokenizer);
  const auto records = load_stats_records(a.in);
  auto report = compute_stats(records, *tokenizer, rt.workers());
  std::size_t dead = 0;
  if (a.llm_labels == "on") {
    LabelConfig cfg = rt.config().labels;
    cfg.workers = rt.workers();
    rt.require_profiles({cfg.answer_type_profile, cfg.decompose_profile});
    std::vector<TrainingExample> sample = records;
    if (a.label_sample && *a.label_sample < sample.size()) {
      Rng rng(a.seed);
      for (std::size_t k = 0; k < *a.label_sample; ++k) std::swap(sample[k], sample[k + rng.index(sample.size() - k)]);
      sample.resize(*a.label_sample);
    }
    const auto labels = label_records(sample, rt.gateway(), rt.templates(), cfg, out / "labels.dead.jsonl");
    attach_labels(report, labels);
    dead = labels.dead_lettered;
  }
  emit_report(report, out);
  for (const char* f : {"domains.csv", "url_sources.csv", "answer_types.csv", "complexity.csv"})
    m.outputs.push_back(out / f);
  m.counts = stats_to_json(report);
  m.counts["label_dead_lettered"] = dead;
  const int code = dead ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(stats_to_json(report));
  return code;
}

struct MixArgs {
  std::string spec, out;
  std::optional<std::size_t> total;
  std::optional<std::uint64_t> seed;
};

int cmd_mix(Runtime& rt, const GlobalOptions& g, const MixArgs& a) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(a.spec));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, a.spec + ": " + e.what());
  }
  auto spec = mix_spec_from_json(j, fs::path(a.spec).parent_path());
  if (a.total) spec.total = *a.total;
  if (a.seed) spec.rng_seed = *a.seed;
  const fs::path out = a.out;
  Manifest m{"mix", {a.spec}, {out}, ojson::object(), manifest_for(g, out)};
  for (const auto& p : spec.parts) m.inputs.push_back(p.path);
  const auto items = mix(spec);
  write_qa(out, items);
  std::map<std::string, std::size_t> per;
  for (const auto& i : items) ++per[i.dataset];
  m.counts = {{"total", items.size()}, {"per_dataset", per}};
  write_manifest(m, rt, kOk);
  print_summary(m.counts);
  return kOk;
}

struct AgentArgs {
  std::string questions, datasets, out, report, items, profile, search_cache, trajectories;
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;
};

int run_agent(Runtime& rt, const GlobalOptions& g, const AgentArgs& a, bool eval) {
  AgentConfig config = rt.config().agent;
  if (!a.profile.empty()) config.profile = a.profile;
  rt.require_profiles({config.profile});
  std::vector<QaItem> items;
  std::vector<fs::path> inputs;
  for (const auto& p : text::split(eval ? a.datasets : a.questions, ',')) {
    const auto path = text::trim(p);
    if (path.empty()) continue;
    inputs.emplace_back(path);
    const auto loaded = load_qa(path);
    items.insert(items.end(), loaded.begin(), loaded.end());
  }
  if (inputs.empty()) fail(ErrorCode::ConfigError, eval ? "--datasets is empty" : "--questions is empty");
  auto searcher = rt.searcher(a.search_cache);
  EvalOptions opts;
  opts.sample = a.sample;
  opts.rng_seed = a.seed;
  opts.workers = rt.workers();
  opts.keep_trajectories = true;
  const auto report = evaluate(items, make_agent_runner(rt.gateway(), *searcher, rt.templates(), config), opts);

  const fs::path primary = eval ? fs::path(a.report) : fs::path(a.out);
  Manifest m{eval ? "eval" : "run", inputs, {}, ojson::object(), manifest_for(g, primary)};
  const fs::path traj_path = eval ? (a.trajectories.empty() ? fs::path() : fs::path(a.trajectories)) : primary;
  if (!traj_path.empty()) {
    std::vector<Trajectory> trajs;
    for (const auto& r : report.items)
      if (r.trajectory) trajs.push_back(*r.trajectory);
    export_trajectories(trajs, traj_path);
    m.outputs.push_back(traj_path);
  }
  if (eval) {
    io::write_file(primary, report_to_json(report).dump(2) + "\n");
    m.outputs.push_back(primary);
  }
  const fs::path items_path = a.items.empty() ? (eval ? sibling(primary, "items") : fs::path()) : fs::path(a.items);
  if (!items_path.empty()) {
    std::string body;
    for (const auto& r : report.items) body += item_result_to_json(r).dump() + "\n";
    io::write_file(items_path, body);
    m.outputs.push_back(items_path);
  }
  std::size_t failures = 0;
  for (const auto& s : report.datasets) failures += s.failures;
  m.counts = report_to_json(report);
  m.counts["failures"] = failures;
  const int code = failures ? kPartial : kOk;
  write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct ValidateArgs {
  std::string in;
};

int cmd_validate(Runtime& rt, const GlobalOptions& g, const ValidateArgs& a) {
  const fs::path in = a.in;
  Manifest m{"validate", {in}, {}, ojson::object(), g.manifest.empty() ? fs::path() : fs::path(g.manifest)};
  std::size_t records = 0, invalid = 0, warnings = 0;
  ojson problems = ojson::array();
  std::size_t line_no = 0;
  for (const auto& line : io::read_lines(in)) {
    ++line_no;
    ++records;
    std::vector<Violation> violations;
    try {
      const auto r = parse_record(line);
      violations = validate_example(r);
      warnings += example_warnings(r).size();
    } catch (const Error& e) {
      violations.push_back({e.detail(), std::string(to_string(e.code())), ""});
    }
    if (violations.empty()) continue;
    ++invalid;
    for (const auto& v : violations) {
      if (problems.size() < 100) problems.push_back({{"line", line_no}, {"field", v.field}, {"rule", v.rule}});
      log::warn("validate", std::to_string(line_no), describe(v));
    }
  }
  m.counts = {{"records", records}, {"invalid", invalid}, {"warnings", warnings}, {"violations", problems}};
  const int code = invalid ? kPartial : kOk;
  if (!m.path.empty()) write_manifest(m, rt, code);
  print_summary(m.counts);
  return code;
}

struct ServeArgs {
  std::string host = "127.0.0.1", search_cache;
  int port = 8080;
};

SearchServer* g_server = nullptr;

int cmd_serve(Runtime& rt, const ServeArgs& a) {
  auto searcher = rt.searcher(a.search_cache);
  SearchServer server(*searcher);
  const int port = server.bind(a.host, a.port);
  log::info("serve-search", "", "listening", {{"host", a.host}, {"port", port}});
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.run();
  g_server = nullptr;
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::MalformedCatalog:
      return kConfigError;
    default:
      return kFatal;
  }
}

void final_line(const std::string& command, int code, const std::optional<std::pair<std::string, std::string>>& error) {
  ojson j;
  j["event"] = "exit";
  j["command"] = command;
  j["exit_code"] = code;
  if (error) j["error"] = {{"code", error->first}, {"detail", error->second}};
  std::cerr << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << std::endl;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"orbit: synthesize, verify and evaluate multi-hop search QA data", "orbit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "pipeline config (JSON)");
  app.add_option("--workers", g.workers, "worker threads (default: CPU count)");
  app.add_flag("--replay", g.replay, "cache-only: no live network or live model calls");
  app.add_option("--fixed-time", g.fixed_time, "stamp records with this UTC time (YYYY-MM-DDTHH:MM:SSZ)");
  app.add_option("--manifest", g.manifest, "manifest path (default: next to the primary output)");
  app.add_option("--log-level", g.log_level, "debug|info|warn|error|off");

  HarvestArgs harvest_a;
  auto* harvest_c = app.add_subcommand("harvest", "expand a category catalog into seeds");
  harvest_c->add_option("--catalog", harvest_a.catalog)->required();
  harvest_c->add_option("--out", harvest_a.out)->required();
  harvest_c->add_option("--sources", harvest_a.sources);
  harvest_c->add_option("--budget", harvest_a.budget);
  harvest_c->add_option("--recursion", harvest_a.recursion);

  GenerateArgs gen_a;
  auto* gen_c = app.add_subcommand("generate", "generate candidate question-answer pairs from seeds");
  gen_c->add_option("--seeds", gen_a.seeds)->required();
  gen_c->add_option("--out", gen_a.out)->required();
  gen_c->add_option("--discards", gen_a.discards);
  gen_c->add_option("--dead-letters", gen_a.dead_letters);
  gen_c->add_option("--profile", gen_a.profile);
  gen_c->add_option("--min-evidence", gen_a.min_evidence);
  gen_c->add_option("--max-attempts", gen_a.max_attempts);
  gen_c->add_option("--rng-seed", gen_a.rng_seed);

  VerifySelfArgs vs_a;
  auto* vs_c = app.add_subcommand("verify-self", "self-verify candidates with a search-capable model");
  vs_c->add_option("--in", vs_a.in)->required();
  vs_c->add_option("--out", vs_a.out)->required();
  vs_c->add_option("--rejected", vs_a.rejected);
  vs_c->add_option("--dead-letters", vs_a.dead_letters);

  FetchArgs fetch_a;
  auto* fetch_c = app.add_subcommand("fetch-evidence", "fetch and extract every evidence URL into the cache");
  fetch_c->add_option("--in", fetch_a.in)->required();
  fetch_c->add_option("--cache", fetch_a.cache)->required();

  VerifyExternalArgs ve_a;
  auto* ve_c = app.add_subcommand("verify-external", "judge self-verified records against scraped evidence");
  ve_c->add_option("--in", ve_a.in)->required();
  ve_c->add_option("--cache", ve_a.cache)->required();
  ve_c->add_option("--out", ve_a.out)->required();
  ve_c->add_option("--rejected", ve_a.rejected);
  ve_c->add_option("--dead-letters", ve_a.dead_letters);

  ImportArgs imp_a;
  auto* imp_c = app.add_subcommand("import-manual", "import manually verified pairs (CSV or JSONL)");
  imp_c->add_option("--in", imp_a.in)->required();
  imp_c->add_option("--out", imp_a.out)->required();
  imp_c->add_flag("--append", imp_a.append);

  StatsArgs stats_a;
  auto* stats_c = app.add_subcommand("stats", "dataset statistics and histograms");
  stats_c->add_option("--in", stats_a.in)->required();
  stats_c->add_option("--out", stats_a.out)->required();
  stats_c->add_option("--tokenizer", stats_a.tokenizer, "approx | exec:<command>");
  stats_c->add_option("--llm-labels", stats_a.llm_labels, "on|off");
  stats_c->add_option("--label-sample", stats_a.label_sample);
  stats_c->add_option("--seed", stats_a.seed);

  MixArgs mix_a;
  auto* mix_c = app.add_subcommand("mix", "mix QA datasets by weight");
  mix_c->add_option("--spec", mix_a.spec)->required();
  mix_c->add_option("--out", mix_a.out)->required();
  mix_c->add_option("--total", mix_a.total);
  mix_c->add_option("--seed", mix_a.seed);

  AgentArgs run_a;
  auto* run_c = app.add_subcommand("run", "run the search agent over questions and export trajectories");
  run_c->add_option("--questions", run_a.questions)->required();
  run_c->add_option("--out", run_a.out)->required();
  run_c->add_option("--items", run_a.items);
  run_c->add_option("--profile", run_a.profile);
  run_c->add_option("--search-cache", run_a.search_cache);

  AgentArgs eval_a;
  auto* eval_c = app.add_subcommand("eval", "exact-match evaluation over QA datasets");
  eval_c->add_option("--datasets", eval_a.datasets, "comma-separated QA files")->required();
  eval_c->add_option("--report", eval_a.report)->required();
  eval_c->add_option("--items", eval_a.items);
  eval_c->add_option("--trajectories", eval_a.trajectories);
  eval_c->add_option("--sample", eval_a.sample, "items per dataset");
  eval_c->add_option("--seed", eval_a.seed);
  eval_c->add_option("--profile", eval_a.profile);
  eval_c->add_option("--search-cache", eval_a.search_cache);

  ValidateArgs val_a;
  auto* val_c = app.add_subcommand("validate", "check every record invariant of a dataset file");
  val_c->add_option("--in", val_a.in)->required();

  ServeArgs serve_a;
  auto* serve_c = app.add_subcommand("serve-search", "expose metasearch as POST /search");
  serve_c->add_option("--host", serve_a.host);
  serve_c->add_option("--port", serve_a.port);
  serve_c->add_option("--search-cache", serve_a.search_cache);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\nerror: " << e.what() << std::endl;
    final_line("", kConfigError, std::pair{std::string("UsageError"), std::string(e.what())});
    return kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    log::set_level(log::level_from_string(g.log_level));
    Runtime rt(g);
    int code = kOk;
    if (*harvest_c) code = cmd_harvest(rt, g, harvest_a);
    else if (*gen_c) code = cmd_generate(rt, g, gen_a);
    else if (*vs_c) code = cmd_verify_self(rt, g, vs_a);
    else if (*fetch_c) code = cmd_fetch(rt, g, fetch_a);
    else if (*ve_c) code = cmd_verify_external(rt, g, ve_a);
    else if (*imp_c) code = cmd_import(rt, g, imp_a);
    else if (*stats_c) code = cmd_stats(rt, g, stats_a);
    else if (*mix_c) code = cmd_mix(rt, g, mix_a);
    else if (*run_c) code = run_agent(rt, g, run_a, false);
    else if (*eval_c) code = run_agent(rt, g, eval_a, true);
    else if (*val_c) code = cmd_validate(rt, g, val_a);
    else if (*serve_c) code = cmd_serve(rt, serve_a);
    final_line(command, code, std::nullopt);
    return code;
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    final_line(command, code, std::pair{std::string(to_string(e.code())), e.detail()});
    return code;
  } catch (const std::exception& e) {
    final_line(command, kFatal, std::pair{std::string("Internal"), std::string(e.what())});
    return kFatal;
  }
}

}  // namespace orbit::cli
