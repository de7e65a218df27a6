#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exprag/experience_index.hpp"
#include "exprag/rollout.hpp"

namespace exprag {

enum class SftMode { plain, exprag };

std::string_view to_string(SftMode mode);
SftMode sft_mode_from_string(std::string_view text);

struct SftSample {
  std::vector<ChatMessage> messages;
  std::vector<bool> loss_mask;  // true exactly on assistant messages
  std::string source_id;
  std::vector<std::string> retrieved_ids;

  bool operator==(const SftSample&) const = default;
};

struct SftOptions {
  SftMode mode = SftMode::plain;
  std::size_t k = 2;
  TrajectoryFormat fmt = TrajectoryFormat::chat_json;
  // static: the task description; dynamic: chat_json of the first observation.
  RetrievalMode query = RetrievalMode::static_query;
  TiePolicy tie_policy = TiePolicy::lexicographic;
  std::uint64_t tie_seed = 0;
  bool leave_one_out = true;
  std::optional<std::filesystem::path> prompts_dir;
  std::size_t workers = 1;
};

struct SftExport {
  std::vector<SftSample> samples;  // store order
  std::size_t empty_memory_warnings = 0;
};

// One sample per successful trajectory. exprag mode needs `index`, `embedder`
// and `retrieval_store` (the trajectories the index was built from).
SftExport build_sft_samples(const std::vector<Trajectory>& store, const SftOptions& options,
                            const ExperienceIndex* index = nullptr, const Embedder* embedder = nullptr,
                            const std::vector<Trajectory>* retrieval_store = nullptr);

std::string sft_sample_line(const SftSample& sample);
SftSample parse_sft_sample_line(std::string_view line);

// Dataset manifest, including the fine-tuning recipe as passthrough metadata.
nlohmann::ordered_json sft_manifest(const SftOptions& options, const SftExport& result,
                                    const ExperienceIndex* index);
nlohmann::ordered_json sft_hyperparameters();

// Writes the JSONL dataset to `out` and the manifest to `<out>.manifest.json`.
// Returns the number of samples written.
std::size_t export_sft(const std::vector<Trajectory>& store, const SftOptions& options,
                       const std::filesystem::path& out, const ExperienceIndex* index = nullptr,
                       const Embedder* embedder = nullptr, const std::vector<Trajectory>* retrieval_store = nullptr);

// Removes the memory block from an exprag sample's system message.
SftSample strip_memory(SftSample sample);

}  // namespace exprag
