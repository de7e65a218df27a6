#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>

#include "exprag/error.hpp"
#include "exprag/rollout.hpp"
#include "support/generators.hpp"
#include "support/test_policies.hpp"

namespace exprag {
namespace {

struct Bank {
  std::vector<Trajectory> store;
  TrajectoryLookup lookup;
  LocalHashEmbedder embedder;
  ExperienceIndex index;

  explicit Bank(KeyMode mode = KeyMode::task_description)
      : store(collect_mini_trajectories(enumerate_task_specs(Split::easy, 3)).trajectories),
        lookup(store),
        index(build_index(store, {}, mode, embedder)) {}

  EpisodeConfig config(RetrievalMode mode, std::size_t k) const {
    EpisodeConfig c;
    c.retrieval_mode = mode;
    c.k = k;
    c.retrieval = RetrievalContext{&index, &embedder, &lookup, {}};
    c.prompt = builtin_template("mini");
    return c;
  }
};

const TaskSpec kSpec = make_task_spec("pick_and_place", "mug", "drawer 2", 44);

TEST(Validate, ModeMustAgreeWithK) {
  Bank bank;
  EXPECT_NO_THROW(bank.config(RetrievalMode::static_query, 2).validate());
  EXPECT_THROW(bank.config(RetrievalMode::static_query, 0).validate(), ConfigError);
  EXPECT_THROW(bank.config(RetrievalMode::none, 2).validate(), ConfigError);
  EpisodeConfig c = bank.config(RetrievalMode::none, 0);
  EXPECT_NO_THROW(c.validate());
  c.max_steps = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Episode, NaivePlacerNoRetrieval) {
  const NaivePlacer p;
  MiniWorld w;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  const auto r = run_episode(w, p, kSpec, c);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_EQ(r.retrieval_calls, 0u);
  EXPECT_TRUE(r.retrieved_ids_per_call.empty());
  EXPECT_EQ(r.episode_id, "ep-mini-pick_and_place-v" + std::to_string(kSpec.variation_id) + "-s44");
  EXPECT_EQ(r.trajectory.user_turn_count(), static_cast<std::size_t>(r.steps) + 1);
  EXPECT_NO_THROW(validate(r.trajectory));
  EXPECT_EQ(r.trajectory.task_description, describe_task(kSpec));
}

TEST(Episode, StaticRetrievesOnceWithConstantMemory) {
  Bank bank;
  const testing::FixedPolicy p("look");
  MiniWorld w;
  auto c = bank.config(RetrievalMode::static_query, 2);
  c.max_steps = 7;
  const auto r = run_episode(w, p, kSpec, c);
  EXPECT_EQ(r.steps, 7);
  EXPECT_EQ(r.retrieval_calls, 1u);
  ASSERT_EQ(r.retrieved_ids_per_call.size(), 1u);
  EXPECT_EQ(r.retrieved_ids_per_call[0].size(), 2u);
  const auto systems = p.systems();
  ASSERT_EQ(systems.size(), 7u);
  for (const auto& s : systems) EXPECT_EQ(s, systems.front());
  EXPECT_NE(systems.front().find("These are examples of successful trajectories: "), std::string::npos);
}

TEST(Episode, DynamicRetrievesEveryStep) {
  Bank bank(KeyMode::full_trajectory_json);
  const testing::FixedPolicy p("look");
  MiniWorld w;
  auto c = bank.config(RetrievalMode::dynamic_query, 2);
  c.max_steps = 7;
  const auto r = run_episode(w, p, kSpec, c);
  EXPECT_EQ(r.retrieval_calls, 7u);
  EXPECT_EQ(r.retrieved_ids_per_call.size(), 7u);
  EXPECT_EQ(r.memory_per_step.size(), 7u);
}

TEST(Episode, InvalidActionsExhaustBudget) {
  const testing::FixedPolicy p("dance");
  for (int budget : {5, 50}) {
    MiniWorld w;
    EpisodeConfig c;
    c.prompt = builtin_template("mini");
    c.max_steps = budget;
    const auto r = run_episode(w, p, kSpec, c);
    EXPECT_EQ(r.steps, budget);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.trajectory.outcome, (Outcome{false, 0.0}));
  }
}

TEST(Episode, ZeroBudgetSelectsTaskDefault) {
  const testing::FixedPolicy p("dance");
  MiniWorld w;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  c.max_steps = 0;
  EXPECT_EQ(run_episode(w, p, kSpec, c).steps, kDefaultMaxSteps);
}

TEST(Episode, UnavailablePolicyFallsBackToSentinel) {
  const testing::ThrowingPolicy<PolicyUnavailable> p;
  MiniWorld w;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  c.max_steps = 3;
  const auto r = run_episode(w, p, kSpec, c);
  EXPECT_EQ(r.steps, 3);
  EXPECT_EQ(r.errors.size(), 3u);
  EXPECT_EQ(r.trajectory.turns[1].content, "look");
}

TEST(Episode, PolicyErrorAbortsAsFailure) {
  const testing::ThrowingPolicy<PolicyError> p;
  MiniWorld w;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  const auto r = run_episode(w, p, kSpec, c);
  EXPECT_EQ(r.steps, 0);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.errors.size(), 1u);
}

TEST(Episode, PromptSizeMeteredPerCall) {
  const NaivePlacer p;
  MiniWorld w;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  const auto r = run_episode(w, p, kSpec, c);
  ASSERT_EQ(r.prompt_chars_per_step.size(), static_cast<std::size_t>(r.steps));
  ASSERT_EQ(r.prompt_words_per_step.size(), static_cast<std::size_t>(r.steps));
  for (std::size_t i = 1; i < r.prompt_chars_per_step.size(); ++i) {
    EXPECT_GT(r.prompt_chars_per_step[i], r.prompt_chars_per_step[i - 1]);
  }
  EXPECT_EQ(r.prompt_chars_per_step[0], c.prompt.system_text.size() + r.trajectory.turns[0].content.size());
}

TEST(Episode, LogLineIsStableJson) {
  const NaivePlacer p;
  MiniWorld w1;
  MiniWorld w2;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  const auto a = run_episode(w1, p, kSpec, c);
  const auto b = run_episode(w2, p, kSpec, c);
  EXPECT_EQ(episode_log_line(a), episode_log_line(b));
  const auto j = nlohmann::json::parse(episode_log_line(a));
  EXPECT_EQ(j["episode_id"], a.episode_id);
  EXPECT_EQ(j["steps"], a.steps);
  EXPECT_FALSE(j.contains("wall_time"));
  EXPECT_EQ(parse_trajectory_record(j["trajectory"].dump()), a.trajectory);
}

TEST(Batch, ParallelMatchesSerialInOrder) {
  const NaivePlacer p;
  EpisodeConfig c;
  c.prompt = builtin_template("mini");
  const auto specs = sample_task_specs(Split::easy, 12, 5);
  const EnvFactory make = [] { return std::make_unique<MiniWorld>(); };
  const auto serial = run_episodes(make, p, specs, c, 1);
  const auto parallel = run_episodes(make, p, specs, c, 4);
  ASSERT_EQ(serial.size(), specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(serial[i].spec, specs[i]);
    EXPECT_EQ(episode_log_line(serial[i]), episode_log_line(parallel[i]));
  }
}

TEST(Batch, ParallelForRethrows) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
  std::atomic<int> sum{0};
  parallel_for(100, 4, [&sum](std::size_t i) { sum += static_cast<int>(i); });
  EXPECT_EQ(sum.load(), 4950);
}

TEST(Collect, EasySpecsAllSucceed) {
  const auto specs = sample_task_specs(Split::easy, 10, 1);
  const auto r = collect_mini_trajectories(specs);
  ASSERT_EQ(r.trajectories.size(), 10u);
  for (const auto& t : r.trajectories) {
    EXPECT_EQ(t.meta.split, Split::easy);
    EXPECT_TRUE(t.outcome->success);
    EXPECT_EQ(t.id.rfind("mini-", 0), 0u);
  }
}

TEST(Collect, MixedSplitCounts) {
  auto specs = sample_task_specs(Split::easy, 5, 1);
  const auto hard = sample_task_specs(Split::hard, 5, 2);
  specs.insert(specs.end(), hard.begin(), hard.end());
  const auto r = collect_mini_trajectories(specs, 3);
  const auto easy = std::count_if(r.trajectories.begin(), r.trajectories.end(),
                                  [](const Trajectory& t) { return t.meta.split == Split::easy; });
  EXPECT_EQ(easy, 5);
  EXPECT_EQ(r.trajectories.size(), 10u);
}

TEST(Collect, DoubleRunStoresAreByteIdentical) {
  testing::TempDir dir;
  const auto specs = enumerate_task_specs(Split::hard, 4);
  write_store(dir / "a.jsonl", collect_mini_trajectories(specs, 1).trajectories);
  write_store(dir / "b.jsonl", collect_mini_trajectories(specs, 3).trajectories);
  std::ifstream a(dir / "a.jsonl");
  std::ifstream b(dir / "b.jsonl");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Collect, FailingExpertIsReported) {
  const EnvFactory make = [] { return std::make_unique<MiniWorld>(); };
  const ExpertFn idle = [](Environment&) { return std::string("look"); };
  const auto r = collect_trajectories(make, idle, sample_task_specs(Split::easy, 2, 1), 5);
  EXPECT_TRUE(r.trajectories.empty());
  EXPECT_EQ(r.failures.size(), 2u);
}

}  // namespace
}  // namespace exprag
