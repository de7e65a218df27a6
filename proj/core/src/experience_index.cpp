#include "exprag/experience_index.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_set>

#include "exprag/error.hpp"

namespace exprag {

std::string_view to_string(KeyMode mode) {
  return mode == KeyMode::task_description ? "task_description" : "full_trajectory_json";
}

KeyMode key_mode_from_string(std::string_view text) {
  if (text == "task" || text == "task_description") return KeyMode::task_description;
  if (text == "full" || text == "full_trajectory_json") return KeyMode::full_trajectory_json;
  throw ConfigError("unknown key mode '" + std::string(text) + "'");
}

std::string_view to_string(TiePolicy policy) {
  return policy == TiePolicy::lexicographic ? "lexicographic" : "seeded_shuffle";
}

TiePolicy tie_policy_from_string(std::string_view text) {
  if (text == "lexicographic") return TiePolicy::lexicographic;
  if (text == "seeded_shuffle") return TiePolicy::seeded_shuffle;
  throw ConfigError("unknown tie policy '" + std::string(text) + "'");
}

bool IndexFilter::admits(const Trajectory& traj) const {
  if (!splits.empty() && !splits.contains(traj.meta.split)) return false;
  if (!outcomes.empty()) {
    const bool success = traj.outcome && traj.outcome->success;
    if (!outcomes.contains(success ? OutcomeClass::success : OutcomeClass::failure)) return false;
  }
  return !exclude_ids.contains(traj.id);
}

ExperienceIndex::ExperienceIndex(std::vector<IndexEntry> entries, std::size_t dim,
                                 IndexManifest manifest)
    : entries_(std::move(entries)), dim_(dim), manifest_(std::move(manifest)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& e : entries_) {
    if (e.embedding.dim() != dim_) throw DimensionMismatch(dim_, e.embedding.dim());
    if (!seen.insert(e.traj_id).second) {
      throw ValidationError("duplicate trajectory id in index: " + e.traj_id);
    }
  }
}

std::string key_text(const Trajectory& traj, KeyMode mode) {
  if (mode == KeyMode::task_description) return traj.task_description;
  return format_trajectory(traj, TrajectoryFormat::chat_json);
}

ExperienceIndex build_index(const std::vector<Trajectory>& store, const IndexFilter& filter,
                            KeyMode key_mode, const Embedder& embedder, std::string store_path) {
  std::vector<const Trajectory*> admitted;
  std::vector<std::string> keys;
  for (const auto& traj : store) {
    if (!filter.admits(traj)) continue;
    admitted.push_back(&traj);
    keys.push_back(key_text(traj, key_mode));
  }
  std::vector<EmbeddingVector> embeddings;
  if (!keys.empty()) embeddings = embedder.embed_batch(keys);

  std::vector<IndexEntry> entries;
  entries.reserve(admitted.size());
  for (std::size_t i = 0; i < admitted.size(); ++i) {
    const Trajectory& t = *admitted[i];
    entries.push_back(IndexEntry{t.id, std::move(embeddings[i]), t.outcome.value_or(Outcome{}), t.meta});
  }
  const std::size_t dim = entries.empty() ? embedder.dim() : entries.front().embedding.dim();
  return ExperienceIndex(std::move(entries), dim,
                         IndexManifest{std::move(store_path), filter, key_mode, embedder.id()});
}

ExperienceIndex build_index(const std::filesystem::path& store_path, const IndexFilter& filter,
                            KeyMode key_mode, const Embedder& embedder) {
  return build_index(read_store(store_path), filter, key_mode, embedder, store_path.string());
}

std::vector<ScoredId> retrieve_top_k(const ExperienceIndex& index, const EmbeddingVector& query,
                                     std::size_t k, const RetrievalOptions& options) {
  if (query.dim() != index.dim()) throw DimensionMismatch(index.dim(), query.dim());
  if (k == 0) return {};

  const auto& entries = index.entries();
  std::vector<ScoredId> scored;
  scored.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (options.exclude_ids.contains(entries[i].traj_id)) continue;
    scored.push_back(ScoredId{entries[i].traj_id, dot(query.values(), entries[i].embedding.values()), i});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.traj_id < b.traj_id;
  });

  // Chain neighbours closer than the threshold into tie groups, then order
  // each group by the tie policy.
  std::mt19937_64 rng(options.tie_seed);
  std::size_t begin = 0;
  while (begin < scored.size() && begin < k) {
    std::size_t end = begin + 1;
    while (end < scored.size() && scored[end - 1].score - scored[end].score < kTieThreshold) ++end;
    if (end - begin > 1) {
      auto first = scored.begin() + static_cast<std::ptrdiff_t>(begin);
      auto last = scored.begin() + static_cast<std::ptrdiff_t>(end);
      std::sort(first, last, [](const ScoredId& a, const ScoredId& b) { return a.traj_id < b.traj_id; });
      if (options.tie_policy == TiePolicy::seeded_shuffle) {
        // Fisher-Yates with raw engine output; std::shuffle's distribution is
        // implementation-defined.
        for (std::size_t i = end - begin - 1; i > 0; --i) {
          const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
          std::swap(*(first + static_cast<std::ptrdiff_t>(i)), *(first + static_cast<std::ptrdiff_t>(j)));
        }
      }
    }
    begin = end;
  }
  if (scored.size() > k) scored.resize(k);
  return scored;
}

std::vector<ScoredId> retrieve_top_k(const ExperienceIndex& index, std::string_view query,
                                     std::size_t k, const Embedder& embedder,
                                     const RetrievalOptions& options) {
  if (embedder.dim() != 0 && embedder.dim() != index.dim()) {
    throw DimensionMismatch(index.dim(), embedder.dim());
  }
  if (k == 0 || index.empty()) return {};
  return retrieve_top_k(index, embedder.embed(query), k, options);
}

}  // namespace exprag
