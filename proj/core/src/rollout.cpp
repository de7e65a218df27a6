#include "exprag/rollout.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "exprag/error.hpp"
#include "text_util.hpp"

namespace exprag {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string spec_slug(std::string_view env_name, const TaskSpec& spec) {
  return std::string(env_name) + "-" + spec.task_type + "-v" + std::to_string(spec.variation_id) + "-s" +
         std::to_string(spec.seed);
}

struct Retrieval {
  MemoryBlock memory;
  std::vector<std::string> ids;
};

Retrieval retrieve(const EpisodeConfig& cfg, const std::string& query) {
  const auto& r = cfg.retrieval;
  const auto hits = retrieve_top_k(*r.index, query, cfg.k, *r.embedder, r.options);
  std::vector<RetrievedTrajectory> retrieved;
  Retrieval out;
  for (const auto& h : hits) {
    if (!r.lookup) throw ConfigError("retrieval needs a trajectory lookup");
    retrieved.push_back(RetrievedTrajectory{&r.lookup->at(h.traj_id), h.score});
    out.ids.push_back(h.traj_id);
  }
  out.memory = build_memory_block(retrieved, cfg.fmt);
  return out;
}

}  // namespace

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::none:
      return "none";
    case RetrievalMode::static_query:
      return "static";
    case RetrievalMode::dynamic_query:
      return "dynamic";
  }
  return "none";
}

RetrievalMode retrieval_mode_from_string(std::string_view text) {
  if (text == "none") return RetrievalMode::none;
  if (text == "static") return RetrievalMode::static_query;
  if (text == "dynamic") return RetrievalMode::dynamic_query;
  throw ConfigError("unknown retrieval mode '" + std::string(text) + "'");
}

TrajectoryLookup::TrajectoryLookup(const std::vector<Trajectory>& store) {
  for (const auto& t : store) by_id_.emplace(t.id, &t);
}

const Trajectory& TrajectoryLookup::at(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw Error("trajectory '" + id + "' is not in the store");
  return *it->second;
}

void EpisodeConfig::validate() const {
  const bool retrieves = k > 0 && retrieval.index != nullptr;
  if ((retrieval_mode == RetrievalMode::none) == retrieves) {
    throw ConfigError("retrieval mode '" + std::string(to_string(retrieval_mode)) +
                      "' is inconsistent with k = " + std::to_string(k) +
                      (retrieval.index ? "" : " and no index"));
  }
  if (retrieves && !retrieval.embedder) throw ConfigError("retrieval needs an embedder");
  if (max_steps < 0) throw ConfigError("max_steps must not be negative");
}

std::string episode_id_for(std::string_view env_name, const TaskSpec& spec) {
  return "ep-" + spec_slug(env_name, spec);
}

std::string trajectory_id_for(std::string_view env_name, const TaskSpec& spec) {
  return spec_slug(env_name, spec);
}

EpisodeResult run_episode(Environment& env, const Policy& policy, const TaskSpec& spec,
                          const EpisodeConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string env_name = env.env_name();

  EpisodeResult result;
  result.spec = spec;
  result.episode_id = episode_id_for(env_name, spec);

  const std::string first_obs = env.reset(spec);
  Trajectory& traj = result.trajectory;
  traj.id = result.episode_id;
  traj.meta = TaskMeta{env_name, spec.task_type, spec.split, spec.variation_id, spec.seed};
  traj.task_description = extract_task_description(first_obs).value_or(describe_task(spec));
  traj.turns.push_back(Turn{Role::user, first_obs});

  MemoryBlock memory;
  if (config.retrieval_mode == RetrievalMode::static_query) {
    auto r = retrieve(config, build_static_query(traj.task_description));
    memory = std::move(r.memory);
    result.retrieved_ids_per_call.push_back(std::move(r.ids));
    ++result.retrieval_calls;
  }

  const int budget = config.max_steps > 0 ? config.max_steps : default_max_steps(env_name, spec.task_type);
  StepResult last;
  bool aborted = false;
  while (result.steps < budget) {
    if (config.retrieval_mode == RetrievalMode::dynamic_query) {
      auto r = retrieve(config, build_dynamic_query(traj));
      memory = std::move(r.memory);
      result.retrieved_ids_per_call.push_back(std::move(r.ids));
      ++result.retrieval_calls;
    }
    const auto context = assemble_context(config.prompt, memory, traj);
    std::size_t chars = 0;
    std::size_t words = 0;
    for (const auto& m : context) {
      chars += m.content.size();
      words += text::split_words(m.content).size();
    }
    result.prompt_chars_per_step.push_back(chars);
    result.prompt_words_per_step.push_back(words);
    result.memory_per_step.push_back(memory.rendered);

    std::string action;
    try {
      action = policy.decide_action(context);
    } catch (const PolicyUnavailable& e) {
      action = std::string(kInvalidActionSentinel);
      result.errors.push_back("step " + std::to_string(result.steps + 1) + ": policy unavailable: " + e.what());
    } catch (const PolicyError& e) {
      result.errors.push_back("step " + std::to_string(result.steps + 1) + ": policy error: " + e.what());
      aborted = true;
      break;
    }
    last = env.step(action);
    ++result.steps;
    traj.turns.push_back(Turn{Role::assistant, action});
    traj.turns.push_back(Turn{Role::user, last.observation});
    if (last.done) break;
  }

  result.success = !aborted && last.done && last.success;
  result.score = result.success ? 1.0 : (last.score >= 1.0 ? 0.0 : last.score);
  traj.outcome = Outcome{result.success, result.score};
  result.wall_time = std::chrono::steady_clock::now() - started;
  return result;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& f) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> threads;
    const std::size_t count = std::min(workers, n);
    for (std::size_t w = 0; w < count; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<EpisodeResult> run_episodes(const EnvFactory& make_env, const Policy& policy,
                                        const std::vector<TaskSpec>& specs, const EpisodeConfig& config,
                                        std::size_t workers) {
  config.validate();
  std::vector<EpisodeResult> results(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    auto env = make_env();
    results[i] = run_episode(*env, policy, specs[i], config);
  });
  return results;
}

ordered_json episode_log_json(const EpisodeResult& r) {
  ordered_json spec;
  spec["task_type"] = r.spec.task_type;
  spec["object"] = r.spec.object;
  spec["receptacle"] = r.spec.receptacle;
  spec["second_object"] = r.spec.second_object ? ordered_json(*r.spec.second_object) : ordered_json(nullptr);
  spec["split"] = std::string(to_string(r.spec.split));
  spec["seed"] = r.spec.seed;
  spec["variation_id"] = r.spec.variation_id;

  ordered_json j;
  j["episode_id"] = r.episode_id;
  j["spec"] = std::move(spec);
  j["success"] = r.success;
  j["score"] = r.score;
  j["steps"] = r.steps;
  j["retrieval_calls"] = r.retrieval_calls;
  j["retrieved_ids_per_call"] = r.retrieved_ids_per_call;
  j["prompt_chars_per_step"] = r.prompt_chars_per_step;
  j["prompt_words_per_step"] = r.prompt_words_per_step;
  j["errors"] = r.errors;
  j["trajectory"] = ordered_json::parse(serialize_trajectory_record(r.trajectory));
  return j;
}

std::string episode_log_line(const EpisodeResult& result) { return episode_log_json(result).dump(); }

CollectResult collect_trajectories(const EnvFactory& make_env, const ExpertFn& expert,
                                   const std::vector<TaskSpec>& specs, int max_steps, std::size_t workers) {
  std::vector<std::optional<Trajectory>> slots(specs.size());
  std::vector<std::string> reasons(specs.size());
  parallel_for(specs.size(), workers, [&](std::size_t i) {
    const TaskSpec& spec = specs[i];
    try {
      auto env = make_env();
      const std::string obs = env->reset(spec);
      Trajectory t;
      t.id = trajectory_id_for(env->env_name(), spec);
      t.meta = TaskMeta{env->env_name(), spec.task_type, spec.split, spec.variation_id, spec.seed};
      t.task_description = extract_task_description(obs).value_or(describe_task(spec));
      t.turns.push_back(Turn{Role::user, obs});
      StepResult last;
      for (int step = 0; step < max_steps && !last.done; ++step) {
        const std::string action = expert(*env);
        last = env->step(action);
        t.turns.push_back(Turn{Role::assistant, action});
        t.turns.push_back(Turn{Role::user, last.observation});
      }
      if (!last.success) {
        reasons[i] = "expert did not solve the task within " + std::to_string(max_steps) + " steps";
        return;
      }
      t.outcome = Outcome{true, 1.0};
      validate(t);
      slots[i] = std::move(t);
    } catch (const Error& e) {
      reasons[i] = e.what();
    }
  });
  CollectResult out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (slots[i]) out.trajectories.push_back(std::move(*slots[i]));
    else out.failures.push_back(CollectFailure{specs[i], reasons[i]});
  }
  return out;
}

CollectResult collect_mini_trajectories(const std::vector<TaskSpec>& specs, std::size_t workers) {
  return collect_trajectories([] { return std::make_unique<MiniWorld>(); },
                              [](Environment& env) { return static_cast<MiniWorld&>(env).expert_action(); },
                              specs, kDefaultMaxSteps, workers);
}

}  // namespace exprag
