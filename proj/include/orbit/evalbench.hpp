#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "orbit/agent.hpp"

namespace orbit {

struct QaItem {
  std::string dataset;
  std::string id;
  std::string question;
  std::vector<std::string> golds;

  bool operator==(const QaItem&) const = default;
};

enum class QaFormat { Jsonl, Tsv };
/// "jsonl" | "tsv"; Error(InvalidArgument) otherwise.
QaFormat parse_qa_format(std::string_view name);
/// From the file extension (.tsv -> Tsv, anything else -> Jsonl).
QaFormat infer_qa_format(const std::filesystem::path& path);

/// JSONL rows carry {id, question} plus one gold field: "golds",
/// "golden_answers", "answers" (list or string) or "answer" (string).
/// TSV files have a header naming id, question and golds columns; a golds
/// cell holding a JSON array is a multi-gold list, anything else one gold.
/// An optional "dataset" field/column overrides `dataset`, which defaults to
/// the file stem. Throws Error(SchemaViolation, "row N: field").
std::vector<QaItem> load_qa(const std::filesystem::path& path, QaFormat format, std::string dataset = {});
std::vector<QaItem> load_qa(const std::filesystem::path& path);

std::string render_qa_item(const QaItem& item);
void write_qa(const std::filesystem::path& path, const std::vector<QaItem>& items);

struct MixPart {
  std::filesystem::path path;
  std::uint64_t weight = 1;
};

struct MixSpec {
  std::vector<MixPart> parts;
  std::optional<std::size_t> total;  // absent: largest total every pool can serve
  std::uint64_t rng_seed = 0;
};

/// {"parts":[{"path","weight"}], "total"?, "seed"?}; relative paths resolve
/// against `base_dir`.
MixSpec mix_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Hamilton apportionment: floor quotas, leftover units to the largest
/// remainders, ties to the lower index. Weights must be positive.
std::vector<std::size_t> largest_remainder(const std::vector<std::uint64_t>& weights, std::size_t total);

/// Samples counts[i] items from pools[i] without replacement, then shuffles
/// the union with the same seeded generator. Error(PoolTooSmall, dataset).
std::vector<QaItem> mix_pools(const std::vector<std::vector<QaItem>>& pools, const std::vector<std::uint64_t>& weights,
                              std::optional<std::size_t> total, std::uint64_t rng_seed);
std::vector<QaItem> mix(const MixSpec& spec);

/// Up to `per_dataset` items of each dataset, picked by a generator seeded
/// with `rng_seed` over the dataset's items sorted by id, so the choice does
/// not depend on input order.
std::vector<QaItem> subsample(const std::vector<QaItem>& items, std::size_t per_dataset, std::uint64_t rng_seed);

struct ItemResult {
  QaItem item;
  std::optional<std::string> predicted;
  int em = 0;
  std::size_t searches = 0;
  std::string termination;    // "answered" | "turn_budget" | "malformed" | "error"
  std::optional<std::string> error;  // infra failure, scored 0
  std::optional<Trajectory> trajectory;

  bool operator==(const ItemResult&) const = default;
};

struct DatasetScore {
  std::string dataset;
  std::size_t n = 0;
  double em = 0;  // mean x100, one decimal
  std::size_t failures = 0;

  bool operator==(const DatasetScore&) const = default;
};

struct EmReport {
  std::vector<DatasetScore> datasets;  // sorted by name
  std::optional<double> macro_average;  // mean of the reported per-dataset EMs, one decimal
  std::vector<ItemResult> items;        // sorted by (dataset, id)

  bool operator==(const EmReport&) const = default;
};

using TrajectoryRunner = std::function<Trajectory(const QaItem&)>;

TrajectoryRunner make_agent_runner(Gateway& gateway, Searcher& searcher, const TemplateSet& templates,
                                   const AgentConfig& config);

struct EvalOptions {
  std::optional<std::size_t> sample;  // per dataset
  std::uint64_t rng_seed = 0;
  int workers = 1;
  bool keep_trajectories = false;
};

/// Runs every (sampled) item; an exception from the runner scores 0 and is
/// recorded on the item instead of propagating.
EmReport evaluate(const std::vector<QaItem>& items, const TrajectoryRunner& runner, const EvalOptions& options = {});

double round1(double x);
nlohmann::ordered_json report_to_json(const EmReport& report);
nlohmann::ordered_json item_result_to_json(const ItemResult& r);

}  // namespace orbit
