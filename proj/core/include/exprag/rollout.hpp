#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "exprag/environment.hpp"
#include "exprag/experience_index.hpp"
#include "exprag/policy.hpp"
#include "exprag/prompting.hpp"

namespace exprag {

enum class RetrievalMode { none, static_query, dynamic_query };

std::string_view to_string(RetrievalMode mode);  // "none", "static", "dynamic"
RetrievalMode retrieval_mode_from_string(std::string_view text);

// Id -> trajectory view over a loaded store. The store must outlive it.
class TrajectoryLookup {
 public:
  TrajectoryLookup() = default;
  explicit TrajectoryLookup(const std::vector<Trajectory>& store);
  const Trajectory& at(const std::string& id) const;  // throws Error for unknown ids
  bool contains(const std::string& id) const { return by_id_.contains(id); }

 private:
  std::unordered_map<std::string, const Trajectory*> by_id_;
};

struct RetrievalContext {
  const ExperienceIndex* index = nullptr;
  const Embedder* embedder = nullptr;
  const TrajectoryLookup* lookup = nullptr;
  RetrievalOptions options;  // tie policy and tie_seed
};

struct EpisodeConfig {
  RetrievalMode retrieval_mode = RetrievalMode::none;
  std::size_t k = 0;
  RetrievalContext retrieval;
  TrajectoryFormat fmt = TrajectoryFormat::chat_json;
  int max_steps = kDefaultMaxSteps;  // 0 selects default_max_steps() per task
  PromptTemplate prompt;

  // Mode must be none exactly when k = 0 or no index is attached. Throws
  // ConfigError otherwise.
  void validate() const;
};

struct EpisodeResult {
  std::string episode_id;
  TaskSpec spec;
  Trajectory trajectory;
  bool success = false;
  double score = 0.0;
  int steps = 0;
  std::size_t retrieval_calls = 0;
  std::vector<std::vector<std::string>> retrieved_ids_per_call;
  std::vector<std::size_t> prompt_chars_per_step;  // bytes over all message contents
  std::vector<std::size_t> prompt_words_per_step;
  std::vector<std::string> memory_per_step;  // rendered memory block, not logged
  std::vector<std::string> errors;
  std::chrono::nanoseconds wall_time{0};  // not logged, so logs stay byte-stable
};

std::string episode_id_for(std::string_view env_name, const TaskSpec& spec);
std::string trajectory_id_for(std::string_view env_name, const TaskSpec& spec);

// Resets `env` with `spec`, then alternates policy and environment until the
// episode is done or max_steps actions have been taken.
EpisodeResult run_episode(Environment& env, const Policy& policy, const TaskSpec& spec,
                          const EpisodeConfig& config);

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// Runs specs on up to `workers` threads. Results come back in spec order.
std::vector<EpisodeResult> run_episodes(const EnvFactory& make_env, const Policy& policy,
                                        const std::vector<TaskSpec>& specs, const EpisodeConfig& config,
                                        std::size_t workers = 1);

// One JSONL log line (no trailing newline).
std::string episode_log_line(const EpisodeResult& result);
nlohmann::ordered_json episode_log_json(const EpisodeResult& result);

using ExpertFn = std::function<std::string(Environment&)>;

struct CollectFailure {
  TaskSpec spec;
  std::string reason;
};

struct CollectResult {
  std::vector<Trajectory> trajectories;  // spec order
  std::vector<CollectFailure> failures;
};

CollectResult collect_trajectories(const EnvFactory& make_env, const ExpertFn& expert,
                                   const std::vector<TaskSpec>& specs, int max_steps = kDefaultMaxSteps,
                                   std::size_t workers = 1);

// Mini-world with its scripted expert.
CollectResult collect_mini_trajectories(const std::vector<TaskSpec>& specs, std::size_t workers = 1);

// Runs f(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& f);

}  // namespace exprag
