#include <gtest/gtest.h>

#include <fstream>

#include "exprag/error.hpp"
#include "exprag/prompting.hpp"
#include "support/generators.hpp"

namespace exprag {
namespace {

Trajectory traj(const std::string& id, bool success, const std::string& action) {
  Trajectory t;
  t.id = id;
  t.meta = {"mini", "pick_and_place", Split::easy, 0, 0};
  t.task_description = "put a apple in drawer 1.";
  t.turns = {{Role::user, "Your task is to: put a apple in drawer 1."}, {Role::assistant, action}};
  t.outcome = Outcome{success, success ? 1.0 : 0.0};
  return t;
}

TEST(StaticQuery, IsIdentity) {
  EXPECT_EQ(build_static_query("put a candle in drawer."), "put a candle in drawer.");
  EXPECT_EQ(build_static_query("  padded \n"), "  padded \n");
  std::mt19937_64 rng(50);
  for (int i = 0; i < 100; ++i) {
    const auto d = testing::random_text(rng, 12);
    EXPECT_EQ(build_static_query(d), d);
  }
  EXPECT_THROW(build_static_query(""), ValidationError);
}

TEST(DynamicQuery, SingleTurnIsOneObject) {
  Trajectory t = traj("a", true, "look");
  const auto h = partial_history(t, 1);
  EXPECT_EQ(build_dynamic_query(h), R"([{"role": "user", "content": "Your task is to: put a apple in drawer 1."}])");
  EXPECT_EQ(build_dynamic_query(h), build_dynamic_query(h));
  Trajectory empty = t;
  empty.turns.clear();
  EXPECT_THROW(build_dynamic_query(empty), ValidationError);
}

// A closed JSON array cannot be a literal prefix of a longer one, so the
// check drops the closing bracket of the shorter query.
TEST(DynamicQuery, GrowsByExtension) {
  std::mt19937_64 rng(51);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto t = testing::random_trajectory(rng, i);
    for (std::size_t s = 1; s < t.user_turn_count(); ++s) {
      const auto a = build_dynamic_query(partial_history(t, s));
      const auto b = build_dynamic_query(partial_history(t, s + 1));
      ASSERT_EQ(a.back(), ']');
      const auto open = a.substr(0, a.size() - 1);
      EXPECT_LT(open.size(), b.size());
      EXPECT_EQ(b.compare(0, open.size(), open), 0);
    }
  }
}

TEST(MemoryBlock, EmptyRetrievalRendersNothing) {
  const auto block = build_memory_block({});
  EXPECT_EQ(block.rendered, "");
  EXPECT_TRUE(block.empty());
}

TEST(MemoryBlock, SingleSuccessBeginsWithHeader) {
  const auto t = traj("a", true, "look");
  const RetrievedTrajectory r{&t, 0.5};
  const auto block = build_memory_block(std::span(&r, 1));
  EXPECT_EQ(block.rendered.rfind("These are examples of successful trajectories: [{", 0), 0u);
  EXPECT_EQ(block.rendered, "These are examples of successful trajectories: " +
                                format_trajectory(t, TrajectoryFormat::chat_json) + ".");
}

TEST(MemoryBlock, PartitionsAndSortsByScore) {
  const auto s1 = traj("s1", true, "s-low");
  const auto s2 = traj("s2", true, "s-high");
  const auto f1 = traj("f1", false, "f-high");
  const auto f2 = traj("f2", false, "f-low");
  const std::vector<RetrievedTrajectory> r{{&s1, 0.1}, {&f2, 0.2}, {&s2, 0.9}, {&f1, 0.8}};
  const auto block = build_memory_block(r, TrajectoryFormat::compact_json);
  ASSERT_EQ(block.successful.size(), 2u);
  ASSERT_EQ(block.unsuccessful.size(), 2u);
  const auto c = [](const Trajectory& t) { return format_trajectory(t, TrajectoryFormat::compact_json); };
  EXPECT_EQ(block.successful[0], c(s2));
  EXPECT_EQ(block.unsuccessful[0], c(f1));
  EXPECT_EQ(block.rendered, "These are examples of successful trajectories: " + c(s2) + "\n" + c(s1) +
                                ". These are examples of unsuccessful trajectories: " + c(f1) + "\n" + c(f2) + ".");
}

TEST(MemoryBlock, FailuresOnlyOmitsSuccessSentence) {
  const auto f = traj("f", false, "x");
  const RetrievedTrajectory r{&f, 0.3};
  EXPECT_EQ(build_memory_block(std::span(&r, 1)).rendered,
            "These are examples of unsuccessful trajectories: " + format_trajectory(f, TrajectoryFormat::chat_json) +
                ".");
}

TEST(MemoryBlock, ParsesBackIntoTurns) {
  const auto s = traj("s", true, "go to drawer 1");
  const auto f = traj("f", false, "look \"quoted\"");
  for (auto fmt : {TrajectoryFormat::chat_json, TrajectoryFormat::agentic_json, TrajectoryFormat::compact_json}) {
    const std::vector<RetrievedTrajectory> r{{&s, 0.9}, {&f, 0.1}};
    const auto block = build_memory_block(r, fmt);
    const auto parsed = parse_memory_block(compose_system_message({"mini", "sys"}, block), fmt);
    ASSERT_EQ(parsed.successful.size(), 1u);
    ASSERT_EQ(parsed.unsuccessful.size(), 1u);
    EXPECT_EQ(parsed.successful[0], s.turns);
    EXPECT_EQ(parsed.unsuccessful[0], f.turns);
  }
}

TEST(SystemMessage, EmptyMemoryIsTemplateText) {
  EXPECT_EQ(compose_system_message({"mini", "rules"}, MemoryBlock{}), "rules");
  MemoryBlock m;
  m.rendered = "These are examples of successful trajectories: [].";
  const auto msg = compose_system_message({"mini", "rules"}, m);
  EXPECT_EQ(msg, "rules\n\n" + m.rendered);
}

TEST(Context, CountsForThreeStepHistory) {
  Trajectory t = traj("a", true, "a1");
  t.turns.push_back({Role::user, "o2"});
  t.turns.push_back({Role::assistant, "a2"});
  t.turns.push_back({Role::user, "o3"});
  t.turns.push_back({Role::assistant, "a3"});
  for (std::size_t step = 1; step <= 3; ++step) {
    const auto ctx = assemble_context({"mini", "rules"}, MemoryBlock{}, partial_history(t, step));
    ASSERT_EQ(ctx.size(), 2 * step);
    EXPECT_EQ(ctx.front().role, Role::system);
    EXPECT_EQ(ctx.back().role, Role::user);
    EXPECT_EQ(std::count_if(ctx.begin(), ctx.end(), [](const ChatMessage& m) { return m.role == Role::user; }),
              static_cast<long>(step));
  }
  EXPECT_THROW(assemble_context({"mini", "rules"}, MemoryBlock{}, t), ValidationError);
}

TEST(Context, ReplacesHistorySystemTurn) {
  Trajectory t = traj("a", true, "a1");
  t.turns.insert(t.turns.begin(), Turn{Role::system, "old"});
  const auto ctx = assemble_context({"mini", "new"}, MemoryBlock{}, partial_history(t, 1));
  ASSERT_EQ(ctx.size(), 2u);
  EXPECT_EQ(ctx[0].content, "new");
}

TEST(Templates, BuiltinsListActionTemplates) {
  for (const char* env : {"mini", "alfworld", "scienceworld"}) {
    const auto t = builtin_template(env);
    EXPECT_EQ(t.env_name, env);
    EXPECT_FALSE(t.system_text.empty());
    EXPECT_NE(t.system_text.back(), '\n');
  }
  EXPECT_NE(builtin_template("mini").system_text.find("go to"), std::string::npos);
  EXPECT_THROW(builtin_template("nethack"), Error);
}

TEST(Templates, LoadsFromDirectory) {
  testing::TempDir dir;
  {
    std::ofstream f(dir / "mini.txt");
    f << "custom rules\n\n";
  }
  EXPECT_EQ(load_template(dir.path(), "mini").system_text, "custom rules");
  EXPECT_THROW(load_template(dir.path(), "alfworld"), Error);
}

}  // namespace
}  // namespace exprag
