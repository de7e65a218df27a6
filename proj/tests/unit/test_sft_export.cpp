#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>

#include "exprag/error.hpp"
#include "exprag/sft_export.hpp"
#include "support/generators.hpp"

namespace exprag {
namespace {

// Expert trajectories with every third one relabelled as a failure.
std::vector<Trajectory> mixed_store(std::size_t n) {
  auto specs = enumerate_task_specs(Split::easy, 5);
  const auto hard = enumerate_task_specs(Split::hard, 6);
  specs.insert(specs.end(), hard.begin(), hard.end());
  specs.resize(n);
  auto store = collect_mini_trajectories(specs).trajectories;
  for (std::size_t i = 0; i < store.size(); i += 3) store[i].outcome = Outcome{false, 0.0};
  return store;
}

TEST(Sft, OnlySuccessfulSources) {
  auto store = mixed_store(5);
  store[1].outcome = Outcome{false, 0.0};
  const auto out = build_sft_samples(store, {});
  ASSERT_EQ(out.samples.size(), 2u);
  EXPECT_EQ(out.samples[0].source_id, store[2].id);
  EXPECT_EQ(out.samples[1].source_id, store[4].id);
}

TEST(Sft, LossMaskMarksAssistantMessages) {
  const auto store = mixed_store(12);
  for (const auto& s : build_sft_samples(store, {}).samples) {
    ASSERT_EQ(s.loss_mask.size(), s.messages.size());
    EXPECT_EQ(s.messages[0].role, Role::system);
    EXPECT_EQ(s.messages[0].content, builtin_template("mini").system_text);
    for (std::size_t i = 0; i < s.messages.size(); ++i) {
      EXPECT_EQ(s.loss_mask[i], s.messages[i].role == Role::assistant);
    }
    EXPECT_TRUE(s.retrieved_ids.empty());
  }
}

TEST(Sft, SingletonIndexYieldsEmptyMemoryWarning) {
  const auto store = mixed_store(2);
  LocalHashEmbedder e;
  const std::vector<Trajectory> one{store[1]};
  const auto index = build_index(one, {}, KeyMode::task_description, e);
  SftOptions opts;
  opts.mode = SftMode::exprag;
  const auto out = build_sft_samples(one, opts, &index, &e);
  ASSERT_EQ(out.samples.size(), 1u);
  EXPECT_TRUE(out.samples[0].retrieved_ids.empty());
  EXPECT_EQ(out.samples[0].messages[0].content, builtin_template("mini").system_text);
  EXPECT_EQ(out.empty_memory_warnings, 1u);
}

TEST(Sft, LeaveOneOutAndStripEquivalence) {
  const auto store = mixed_store(50);
  LocalHashEmbedder e;
  const auto index = build_index(store, {}, KeyMode::task_description, e);
  SftOptions opts;
  opts.mode = SftMode::exprag;
  for (auto query : {RetrievalMode::static_query, RetrievalMode::dynamic_query}) {
    opts.query = query;
    const auto rag = build_sft_samples(store, opts, &index, &e);
    const auto plain = build_sft_samples(store, {});
    ASSERT_EQ(rag.samples.size(), plain.samples.size());
    for (std::size_t i = 0; i < rag.samples.size(); ++i) {
      const auto& s = rag.samples[i];
      EXPECT_EQ(s.retrieved_ids.size(), 2u);
      EXPECT_EQ(std::find(s.retrieved_ids.begin(), s.retrieved_ids.end(), s.source_id), s.retrieved_ids.end());
      EXPECT_NE(s.messages[0].content.find("These are examples of"), std::string::npos);
      EXPECT_EQ(strip_memory(s), plain.samples[i]);
    }
  }
  opts.leave_one_out = false;
  opts.query = RetrievalMode::static_query;
  const auto self = build_sft_samples(store, opts, &index, &e);
  std::size_t hits = 0;
  for (const auto& s : self.samples) hits += s.retrieved_ids.front() == s.source_id ? 1 : 0;
  EXPECT_EQ(hits, self.samples.size());
}

TEST(Sft, ExpragNeedsIndex) {
  SftOptions opts;
  opts.mode = SftMode::exprag;
  EXPECT_THROW(build_sft_samples(mixed_store(2), opts), ConfigError);
}

TEST(Sft, LineRoundTrip) {
  const auto store = mixed_store(6);
  LocalHashEmbedder e;
  const auto index = build_index(store, {}, KeyMode::task_description, e);
  SftOptions opts;
  opts.mode = SftMode::exprag;
  for (const auto& s : build_sft_samples(store, opts, &index, &e).samples) {
    const auto line = sft_sample_line(s);
    EXPECT_EQ(parse_sft_sample_line(line), s);
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["provenance"]["source_id"], s.source_id);
  }
  EXPECT_THROW(parse_sft_sample_line("{}"), Error);
}

TEST(Sft, ExportWritesDatasetAndManifest) {
  testing::TempDir dir;
  const auto store = mixed_store(9);
  const auto n = export_sft(store, {}, dir / "train.jsonl");
  EXPECT_EQ(n, 6u);
  std::ifstream data(dir / "train.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(data, line);) ++lines;
  EXPECT_EQ(lines, n);
  std::ifstream mf(dir / "train.jsonl.manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  EXPECT_EQ(manifest["mode"], "plain");
  EXPECT_EQ(manifest["hyperparameters"]["lora_rank"], 8);
}

// Recipe values copied into dataset manifests.
TEST(Sft, HyperparametersAreFrozen) {
  const auto h = sft_hyperparameters();
  EXPECT_EQ(h["optimizer"], "PagedAdamW8bit");
  EXPECT_DOUBLE_EQ(h["learning_rate"].get<double>(), 5e-5);
  EXPECT_DOUBLE_EQ(h["weight_decay"].get<double>(), 0.0);
  EXPECT_EQ(h["lora_rank"], 8);
  EXPECT_EQ(h["lora_alpha"], 16);
  EXPECT_DOUBLE_EQ(h["lora_dropout"].get<double>(), 0.1);
  EXPECT_EQ(h["seed"], 2025);
  EXPECT_EQ(h["epochs"]["alfworld"], 9);
  EXPECT_EQ(h["epochs"]["scienceworld"], 29);
}

}  // namespace
}  // namespace exprag
