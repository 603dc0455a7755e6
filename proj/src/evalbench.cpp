#include "orbit/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "orbit/error.hpp"
#include "orbit/io.hpp"
#include "orbit/log.hpp"
#include "orbit/model.hpp"
#include "orbit/parallel.hpp"
#include "orbit/rng.hpp"
#include "orbit/text.hpp"

namespace orbit {

namespace {

[[noreturn]] void row_error(std::size_t row, std::string_view field) {
  fail(ErrorCode::SchemaViolation, "row " + std::to_string(row) + ": " + std::string(field));
}

std::vector<std::string> golds_from_json(const nlohmann::json& v, std::size_t row, std::string_view field) {
  std::vector<std::string> golds;
  if (v.is_string()) {
    golds.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& g : v) {
      if (!g.is_string()) row_error(row, field);
      golds.push_back(g.get<std::string>());
    }
  } else {
    row_error(row, field);
  }
  std::erase_if(golds, [](const std::string& g) { return text::trim(g).empty(); });
  if (golds.empty()) row_error(row, field);
  return golds;
}

std::string string_field(const nlohmann::json& j, const char* key, std::size_t row) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string() || text::trim(it->get<std::string>()).empty()) row_error(row, key);
  return it->get<std::string>();
}

// Ids may be numeric in some public dumps.
std::string id_field(const nlohmann::json& j, std::size_t row) {
  const auto it = j.find("id");
  if (it != j.end() && it->is_number_integer()) return std::to_string(it->get<long long>());
  return string_field(j, "id", row);
}

QaItem item_from_json(const nlohmann::json& j, std::size_t row, const std::string& dataset) {
  if (!j.is_object()) row_error(row, "object");
  QaItem item;
  item.dataset = dataset;
  if (const auto it = j.find("dataset"); it != j.end() && it->is_string()) item.dataset = it->get<std::string>();
  item.id = id_field(j, row);
  item.question = string_field(j, "question", row);
  for (const char* key : {"golds", "golden_answers", "answers", "answer"}) {
    if (const auto it = j.find(key); it != j.end()) {
      item.golds = golds_from_json(*it, row, "golds");
      return item;
    }
  }
  row_error(row, "golds");
}

std::vector<QaItem> load_jsonl(const std::filesystem::path& path, const std::string& dataset) {
  std::vector<QaItem> out;
  std::size_t row = 0;
  for (const auto& line : io::read_lines(path)) {
    ++row;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      row_error(row, "json");
    }
    out.push_back(item_from_json(j, row, dataset));
  }
  return out;
}

std::vector<QaItem> load_tsv(const std::filesystem::path& path, const std::string& dataset) {
  const auto lines = text::split_lines(io::read_file(path));
  std::vector<std::vector<std::string>> rows;
  for (const auto& l : lines) {
    if (!text::trim(l).empty()) rows.push_back(text::split(l, '\t'));
  }
  if (rows.empty()) return {};
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::trim(header[i]) == name) return i;
    return std::nullopt;
  };
  const auto id_col = column("id"), q_col = column("question"), g_col = column("golds"), d_col = column("dataset");
  if (!id_col) row_error(0, "id");
  if (!q_col) row_error(0, "question");
  if (!g_col) row_error(0, "golds");
  std::vector<QaItem> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    auto cell = [&](std::size_t c) { return c < cells.size() ? cells[c] : std::string(); };
    nlohmann::json j;
    j["id"] = cell(*id_col);
    j["question"] = cell(*q_col);
    const std::string g = text::trim(cell(*g_col));
    nlohmann::json golds = g;
    if (!g.empty() && g.front() == '[') {
      try {
        golds = nlohmann::json::parse(g);
      } catch (const nlohmann::json::exception&) {
        row_error(r, "golds");
      }
    }
    j["golds"] = golds;
    if (d_col && !text::trim(cell(*d_col)).empty()) j["dataset"] = cell(*d_col);
    out.push_back(item_from_json(j, r, dataset));
  }
  return out;
}

}  // namespace

QaFormat parse_qa_format(std::string_view name) {
  if (name == "jsonl") return QaFormat::Jsonl;
  if (name == "tsv") return QaFormat::Tsv;
  fail(ErrorCode::InvalidArgument, "qa format: " + std::string(name));
}

QaFormat infer_qa_format(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? QaFormat::Tsv : QaFormat::Jsonl;
}

std::vector<QaItem> load_qa(const std::filesystem::path& path, QaFormat format, std::string dataset) {
  if (dataset.empty()) dataset = path.stem().string();
  return format == QaFormat::Tsv ? load_tsv(path, dataset) : load_jsonl(path, dataset);
}

std::vector<QaItem> load_qa(const std::filesystem::path& path) { return load_qa(path, infer_qa_format(path)); }

std::string render_qa_item(const QaItem& item) {
  nlohmann::ordered_json j;
  j["dataset"] = item.dataset;
  j["id"] = item.id;
  j["question"] = item.question;
  j["golds"] = item.golds;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void write_qa(const std::filesystem::path& path, const std::vector<QaItem>& items) {
  std::string out;
  for (const auto& item : items) out += render_qa_item(item) + "\n";
  io::write_file(path, out);
}

MixSpec mix_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  MixSpec spec;
  if (!j.is_object() || !j.contains("parts") || !j["parts"].is_array() || j["parts"].empty())
    fail(ErrorCode::ConfigError, "mix: parts");
  for (const auto& p : j["parts"]) {
    if (!p.contains("path") || !p["path"].is_string()) fail(ErrorCode::ConfigError, "mix: parts[].path");
    MixPart part;
    part.path = p["path"].get<std::string>();
    if (part.path.is_relative()) part.path = base_dir / part.path;
    const auto w = p.value("weight", 1LL);
    if (w <= 0) fail(ErrorCode::ConfigError, "mix: weight must be positive");
    part.weight = static_cast<std::uint64_t>(w);
    spec.parts.push_back(std::move(part));
  }
  if (j.contains("total") && !j["total"].is_null()) {
    if (!j["total"].is_number_unsigned()) fail(ErrorCode::ConfigError, "mix: total");
    spec.total = j["total"].get<std::size_t>();
  }
  spec.rng_seed = j.value("seed", std::uint64_t{0});
  return spec;
}

std::vector<std::size_t> largest_remainder(const std::vector<std::uint64_t>& weights, std::size_t total) {
  if (weights.empty()) fail(ErrorCode::InvalidArgument, "no weights");
  unsigned __int128 sum = 0;
  for (auto w : weights) {
    if (w == 0) fail(ErrorCode::InvalidArgument, "weights must be positive");
    sum += w;
  }
  std::vector<std::size_t> counts(weights.size());
  std::vector<unsigned __int128> rems(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const unsigned __int128 scaled = static_cast<unsigned __int128>(total) * weights[i];
    counts[i] = static_cast<std::size_t>(scaled / sum);
    rems[i] = scaled % sum;
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rems[a] > rems[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k]];
  return counts;
}

std::vector<QaItem> mix_pools(const std::vector<std::vector<QaItem>>& pools, const std::vector<std::uint64_t>& weights,
                              std::optional<std::size_t> total, std::uint64_t rng_seed) {
  if (pools.size() != weights.size()) fail(ErrorCode::InvalidArgument, "pools and weights differ in length");
  auto pool_name = [&](std::size_t i) {
    return pools[i].empty() ? "#" + std::to_string(i) : pools[i].front().dataset;
  };
  auto fits = [&](const std::vector<std::size_t>& counts) {
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] > pools[i].size()) return false;
    return true;
  };
  std::vector<std::size_t> counts;
  if (total) {
    counts = largest_remainder(weights, *total);
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (counts[i] > pools[i].size()) fail(ErrorCode::PoolTooSmall, pool_name(i));
  } else {
    // Start from the bound each pool allows on its own and walk down.
    const std::uint64_t sum = std::accumulate(weights.begin(), weights.end(), std::uint64_t{0});
    std::size_t t = SIZE_MAX;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (weights[i] == 0) fail(ErrorCode::InvalidArgument, "weights must be positive");
      t = std::min<std::size_t>(t, static_cast<std::size_t>((static_cast<unsigned __int128>(pools[i].size()) * sum +
                                                             weights[i] - 1) / weights[i]));
    }
    for (counts = largest_remainder(weights, t); !fits(counts); counts = largest_remainder(weights, --t)) {
    }
  }
  Rng rng(rng_seed);
  std::vector<QaItem> out;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    std::vector<std::size_t> idx(pools[i].size());
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates
    for (std::size_t k = 0; k < counts[i]; ++k) {
      std::swap(idx[k], idx[k + rng.index(idx.size() - k)]);
      out.push_back(pools[i][idx[k]]);
    }
  }
  rng.shuffle(out);
  return out;
}

std::vector<QaItem> mix(const MixSpec& spec) {
  std::vector<std::vector<QaItem>> pools;
  std::vector<std::uint64_t> weights;
  for (const auto& part : spec.parts) {
    pools.push_back(load_qa(part.path));
    weights.push_back(part.weight);
  }
  return mix_pools(pools, weights, spec.total, spec.rng_seed);
}

namespace {

bool item_less(const QaItem& a, const QaItem& b) {
  return std::tie(a.dataset, a.id, a.question, a.golds) < std::tie(b.dataset, b.id, b.question, b.golds);
}

}  // namespace

std::vector<QaItem> subsample(const std::vector<QaItem>& items, std::size_t per_dataset, std::uint64_t rng_seed) {
  std::map<std::string, std::vector<QaItem>> by_dataset;
  for (const auto& item : items) by_dataset[item.dataset].push_back(item);
  std::vector<QaItem> out;
  for (auto& [name, group] : by_dataset) {
    std::sort(group.begin(), group.end(), item_less);
    Rng rng(rng_seed);
    const std::size_t n = std::min(per_dataset, group.size());
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(group[k], group[k + rng.index(group.size() - k)]);
      out.push_back(group[k]);
    }
  }
  return out;
}

TrajectoryRunner make_agent_runner(Gateway& gateway, Searcher& searcher, const TemplateSet& templates,
                                   const AgentConfig& config) {
  return [&gateway, &searcher, &templates, config](const QaItem& item) {
    return run_trajectory(item.id, item.question, item.golds, gateway, searcher, templates, config);
  };
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

EmReport evaluate(const std::vector<QaItem>& items, const TrajectoryRunner& runner, const EvalOptions& options) {
  std::vector<QaItem> todo = options.sample ? subsample(items, *options.sample, options.rng_seed) : items;
  std::stable_sort(todo.begin(), todo.end(), item_less);
  std::vector<ItemResult> results(todo.size());
  parallel_for(todo.size(), options.workers, [&](std::size_t i) {
    ItemResult& r = results[i];
    r.item = todo[i];
    try {
      Trajectory t = runner(todo[i]);
      r.predicted = t.final_answer;
      r.em = t.termination == Termination::Answered ? t.reward : 0;
      r.searches = t.search_count();
      r.termination = std::string(to_string(t.termination));
      if (options.keep_trajectories) r.trajectory = std::move(t);
    } catch (const std::exception& e) {
      r.em = 0;
      r.termination = "error";
      const auto* oe = dynamic_cast<const Error*>(&e);
      r.error = oe ? std::string(to_string(oe->code())) + ": " + oe->detail() : std::string(e.what());
      log::warn("eval", todo[i].id, "trajectory failed", {{"error", *r.error}});
    }
  });
  EmReport report;
  std::map<std::string, std::pair<std::size_t, std::size_t>> hits;  // dataset -> (sum em, n)
  std::map<std::string, std::size_t> failures;
  for (const auto& r : results) {
    auto& h = hits[r.item.dataset];
    h.first += static_cast<std::size_t>(r.em);
    ++h.second;
    if (r.error) ++failures[r.item.dataset];
  }
  double macro = 0;
  for (const auto& [name, h] : hits) {
    DatasetScore s;
    s.dataset = name;
    s.n = h.second;
    s.em = round1(100.0 * static_cast<double>(h.first) / static_cast<double>(h.second));
    s.failures = failures[name];
    macro += s.em;
    report.datasets.push_back(s);
  }
  if (!report.datasets.empty()) report.macro_average = round1(macro / static_cast<double>(report.datasets.size()));
  report.items = std::move(results);
  return report;
}

nlohmann::ordered_json item_result_to_json(const ItemResult& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.item.dataset;
  j["id"] = r.item.id;
  j["question"] = r.item.question;
  j["golds"] = r.item.golds;
  j["predicted"] = r.predicted ? nlohmann::ordered_json(*r.predicted) : nlohmann::ordered_json();
  j["em"] = r.em;
  j["searches"] = r.searches;
  j["termination"] = r.termination;
  if (r.error) j["error"] = *r.error;
  return j;
}

nlohmann::ordered_json report_to_json(const EmReport& report) {
  nlohmann::ordered_json j;
  j["datasets"] = nlohmann::ordered_json::array();
  for (const auto& s : report.datasets) {
    nlohmann::ordered_json d;
    d["dataset"] = s.dataset;
    d["n"] = s.n;
    d["em"] = s.em;
    d["failures"] = s.failures;
    j["datasets"].push_back(d);
  }
  j["macro_average"] = report.macro_average ? nlohmann::ordered_json(*report.macro_average) : nlohmann::ordered_json();
  j["n_items"] = report.items.size();
  return j;
}

}  // namespace orbit
