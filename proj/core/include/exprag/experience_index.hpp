#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "exprag/embedder.hpp"
#include "exprag/trajectory.hpp"

namespace exprag {

enum class KeyMode { task_description, full_trajectory_json };

std::string_view to_string(KeyMode mode);
KeyMode key_mode_from_string(std::string_view text);  // "task"/"task_description", "full"/"full_trajectory_json"

enum class OutcomeClass { success, failure };

// Which stored trajectories are admitted into an index. Empty sets mean "all".
struct IndexFilter {
  std::set<Split> splits;
  std::set<OutcomeClass> outcomes;
  std::set<std::string> exclude_ids;

  bool admits(const Trajectory& traj) const;
  bool operator==(const IndexFilter&) const = default;
};

struct IndexManifest {
  std::string store_path;
  IndexFilter filter;
  KeyMode key_mode = KeyMode::task_description;
  std::string embedder_id;

  bool operator==(const IndexManifest&) const = default;
};

struct IndexEntry {
  std::string traj_id;
  EmbeddingVector embedding;
  Outcome outcome;
  TaskMeta meta;

  bool operator==(const IndexEntry&) const = default;
};

// The experience bank: trajectory ids with their key embeddings. Immutable
// once constructed, so concurrent readers need no locking.
class ExperienceIndex {
 public:
  // Throws ValidationError on duplicate ids, DimensionMismatch on mixed dims.
  ExperienceIndex(std::vector<IndexEntry> entries, std::size_t dim, IndexManifest manifest);

  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const IndexManifest& manifest() const noexcept { return manifest_; }

  bool operator==(const ExperienceIndex&) const = default;

 private:
  std::vector<IndexEntry> entries_;
  std::size_t dim_;
  IndexManifest manifest_;
};

// Text embedded as the key of a stored trajectory.
std::string key_text(const Trajectory& traj, KeyMode mode);

ExperienceIndex build_index(const std::vector<Trajectory>& store, const IndexFilter& filter,
                            KeyMode key_mode, const Embedder& embedder,
                            std::string store_path = {});
ExperienceIndex build_index(const std::filesystem::path& store_path, const IndexFilter& filter,
                            KeyMode key_mode, const Embedder& embedder);

enum class TiePolicy { lexicographic, seeded_shuffle };

std::string_view to_string(TiePolicy policy);
TiePolicy tie_policy_from_string(std::string_view text);

// Score differences below this are treated as ties.
inline constexpr double kTieThreshold = 1e-9;

struct ScoredId {
  std::string traj_id;
  double score = 0.0;
  std::size_t entry = 0;  // position in ExperienceIndex::entries()

  bool operator==(const ScoredId&) const = default;
};

struct RetrievalOptions {
  TiePolicy tie_policy = TiePolicy::lexicographic;
  std::uint64_t tie_seed = 0;
  std::set<std::string> exclude_ids;
};

// Exact full-scan top-k by dot product, descending. k larger than the index
// returns every entry; k = 0 returns nothing.
std::vector<ScoredId> retrieve_top_k(const ExperienceIndex& index, const EmbeddingVector& query,
                                     std::size_t k, const RetrievalOptions& options = {});
std::vector<ScoredId> retrieve_top_k(const ExperienceIndex& index, std::string_view query,
                                     std::size_t k, const Embedder& embedder,
                                     const RetrievalOptions& options = {});

inline constexpr std::uint32_t kIndexFormatVersion = 1;

void save_index(const ExperienceIndex& index, const std::filesystem::path& path);
// Throws IndexVersionError or CorruptIndexError; never returns a partial index.
ExperienceIndex load_index(const std::filesystem::path& path);

// In-memory encoding used by save_index/load_index.
std::string encode_index(const ExperienceIndex& index);
ExperienceIndex decode_index(std::string_view bytes);

}  // namespace exprag
