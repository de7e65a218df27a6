#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "exprag/experience_index.hpp"
#include "exprag/policy.hpp"
#include "exprag/rollout.hpp"

namespace exprag {

// Which trajectories populate the retrieval index of a grid cell.
// `mismatched` always uses the easy-split index, whatever the eval split.
enum class Composition { all, easy, hard, empty, mismatched };

std::string_view to_string(Composition c);
Composition composition_from_string(std::string_view text);

enum class EvalSplit { easy, hard, all };

std::string_view to_string(EvalSplit s);
EvalSplit eval_split_from_string(std::string_view text);

struct SweepSpec {
  std::vector<std::size_t> ks{0, 1, 2, 4};
  std::vector<RetrievalMode> modes{RetrievalMode::static_query};
  std::vector<Composition> compositions{Composition::all};
  std::vector<std::uint64_t> seeds{1, 2, 3};  // env seeds for eval spec sampling
  EvalSplit eval_split = EvalSplit::all;
  std::size_t episodes_per_split = 20;
  PolicyKind policy = PolicyKind::memory_follower;
  std::string env = "mini";                // "mini" or "external"
  std::vector<std::string> env_command;  // external only
  std::optional<std::filesystem::path> train_store;  // generated from all combinations when unset
  std::uint64_t train_seed = 2025;
  TrajectoryFormat fmt = TrajectoryFormat::chat_json;
  int max_steps = 0;  // 0: per-task default budget
  TiePolicy tie_policy = TiePolicy::lexicographic;
  std::uint64_t tie_seed = 0;
  std::size_t workers = 1;
  std::string embedder = "local_hash:256";
  std::optional<std::filesystem::path> prompts_dir;

  bool operator==(const SweepSpec&) const = default;
};

// Declarative config: one `key = value` per line, `#` comments, lists as
// `[a, b, c]`, strings bare or double-quoted. Unknown keys are errors.
// Relative paths resolve against `base_dir`.
SweepSpec parse_sweep_config(std::string_view text, const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_config(const std::filesystem::path& path);

struct ResultCell {
  double mean_success = 0.0;  // percent, mean over seeds
  double std_success = 0.0;   // percent, population std over per-seed rates
  std::size_t n_seeds = 0;
  std::size_t episodes = 0;
  double mean_steps = 0.0;
  double mean_prompt_chars = 0.0;  // per policy call

  bool operator==(const ResultCell&) const = default;
};

struct ResultRow {
  RetrievalMode mode = RetrievalMode::none;
  std::size_t k = 0;
  Composition composition = Composition::all;
  std::map<std::string, ResultCell> by_split;  // "easy", "hard", "all"

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<std::string> splits;  // column order
  std::vector<ResultRow> rows;      // modes x ks x compositions, config order

  bool operator==(const ResultTable&) const = default;
};

struct SweepEpisode {
  RetrievalMode mode = RetrievalMode::none;
  std::size_t k = 0;
  Composition composition = Composition::all;
  std::uint64_t seed = 0;
  EpisodeResult result;
};

struct SweepResult {
  ResultTable table;
  std::vector<SweepEpisode> episodes;
  std::size_t failed_collections = 0;
};

// Computes a cell from per-seed episode groups.
ResultCell aggregate_cell(const std::vector<std::vector<const EpisodeResult*>>& per_seed);

// Eval specs for one (split, seed); shared by every grid cell.
std::vector<TaskSpec> eval_specs(Split split, std::size_t count, std::uint64_t seed);

SweepResult run_sweep(const SweepSpec& spec);

enum class ReportStyle { csv, markdown };

ReportStyle report_style_from_string(std::string_view text);

// Columns: mode, k, composition, then one "m ± s" column per split. CSV also
// carries <split>_steps and <split>_prompt_chars.
std::string report(const ResultTable& table, ReportStyle style);

std::string table_to_json(const ResultTable& table);
ResultTable table_from_json(std::string_view text);

// Writes table.csv, table.md, table.json and episodes.jsonl into `dir`.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace exprag
