#include <gtest/gtest.h>

#include "exprag/environment.hpp"
#include "exprag/error.hpp"

namespace exprag {
namespace {

std::string where_is(const MiniWorld& w, const std::string& instance) {
  for (const auto& [r, objs] : w.state().contents) {
    if (std::find(objs.begin(), objs.end(), instance) != objs.end()) return r;
  }
  return {};
}

std::vector<TaskSpec> every_spec(std::uint64_t seed) {
  auto specs = enumerate_task_specs(Split::easy, seed);
  const auto hard = enumerate_task_specs(Split::hard, seed + 1);
  specs.insert(specs.end(), hard.begin(), hard.end());
  return specs;
}

TEST(TaskSpec, DerivedFields) {
  const auto s = make_task_spec("pick_two_and_place", "mug", "shelf 1", 3);
  EXPECT_EQ(s.split, Split::hard);
  ASSERT_TRUE(s.second_object.has_value());
  EXPECT_EQ(*s.second_object, "mug");
  EXPECT_EQ(make_task_spec("pick_and_place", "candle", "drawer 1", 0).split, Split::easy);
  EXPECT_THROW(make_task_spec("look_at_obj_in_light", "mug", "shelf 1", 0), ValidationError);
  EXPECT_THROW(make_task_spec("pick_and_place", "mug", "fridge 1", 0), ValidationError);
  EXPECT_THROW(make_task_spec("pick_heat_then_place", "candle", "shelf 1", 0), ValidationError);
}

TEST(TaskSpec, DescriptionsParseBack) {
  for (const auto& s : every_spec(5)) {
    const auto d = describe_task(s);
    const auto p = parse_task_description(d);
    ASSERT_TRUE(p.has_value()) << d;
    EXPECT_EQ(p->task_type, s.task_type) << d;
    EXPECT_EQ(p->object, s.object) << d;
    EXPECT_EQ(p->receptacle, s.receptacle) << d;
  }
  const auto p = parse_task_description("put a candle in drawer.");
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->receptacle, "drawer 1");
  EXPECT_FALSE(parse_task_description("dance wildly.").has_value());
}

TEST(TaskSpec, ExtractsFromObservation) {
  EXPECT_EQ(extract_task_description("hello\n\nYour task is to: put a mug in shelf 1."), "put a mug in shelf 1.");
  EXPECT_FALSE(extract_task_description("no task here").has_value());
}

TEST(MiniWorld, ResetIsDeterministic) {
  const auto spec = make_task_spec("pick_and_place", "apple", "drawer 2", 42);
  MiniWorld a;
  MiniWorld b;
  EXPECT_EQ(a.reset(spec), b.reset(spec));
  EXPECT_EQ(a.state(), b.state());
}

TEST(MiniWorld, SeedChangesPlacement) {
  std::size_t differing = 0;
  for (std::int64_t s = 0; s < 20; ++s) {
    MiniWorld a;
    MiniWorld b;
    a.reset(make_task_spec("pick_and_place", "apple", "drawer 2", s));
    b.reset(make_task_spec("pick_and_place", "apple", "drawer 2", s + 1));
    differing += a.state().contents != b.state().contents ? 1 : 0;
  }
  EXPECT_GE(differing, 1u);
}

TEST(MiniWorld, PickTwoPlacesTwoInstances) {
  MiniWorld w;
  w.reset(make_task_spec("pick_two_and_place", "egg", "shelf 1", 9));
  EXPECT_FALSE(where_is(w, "egg 1").empty());
  EXPECT_FALSE(where_is(w, "egg 2").empty());
}

TEST(MiniWorld, TaskObjectsNeverStartAtTarget) {
  for (const auto& s : every_spec(6)) {
    MiniWorld w;
    w.reset(s);
    EXPECT_NE(where_is(w, s.object + " 1"), s.receptacle);
  }
}

TEST(MiniWorld, ObservationsFollowTransitionTable) {
  MiniWorld w;
  const auto obs = w.reset(make_task_spec("pick_heat_then_place", "mug", "shelf 1", 1));
  EXPECT_NE(obs.find("You are at countertop 1."), std::string::npos);
  EXPECT_NE(obs.find("Your task is to: heat some mug and put it in shelf 1."), std::string::npos);
  EXPECT_EQ(w.step("go to drawer 1").observation.rfind("You arrive at drawer 1. ", 0), 0u);
  EXPECT_EQ(w.step("heat mug 1 with fridge 1").observation, "Nothing happens.");
  EXPECT_EQ(w.step("fly away").observation, "Nothing happens.");
  EXPECT_EQ(w.state().steps, 3);
}

TEST(MiniWorld, SingleSlotInventory) {
  MiniWorld w;
  w.reset(make_task_spec("pick_two_and_place", "egg", "shelf 1", 4));
  const auto r1 = where_is(w, "egg 1");
  w.step("go to " + r1);
  if (MiniWorld::openable(r1)) w.step("open " + r1);
  EXPECT_EQ(w.step("take egg 1 from " + r1).observation, "You pick up the egg 1 from the " + r1 + ".");
  EXPECT_EQ(w.state().inventory, "egg 1");
  const auto r2 = where_is(w, "egg 2");
  w.step("go to " + r2);
  if (MiniWorld::openable(r2)) w.step("open " + r2);
  EXPECT_EQ(w.step("take egg 2 from " + r2).observation, "Nothing happens.");
  EXPECT_EQ(w.state().inventory, "egg 1");
}

TEST(MiniWorld, StepContract) {
  MiniWorld w;
  EXPECT_THROW(w.step("look"), ContractError);
  const auto spec = make_task_spec("pick_and_place", "cup", "countertop 1", 8);
  w.reset(spec);
  StepResult r;
  for (int i = 0; i < 20 && !r.done; ++i) r = w.step(w.expert_action());
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_THROW(w.step("look"), ContractError);
}

TEST(Expert, FirstActionGoesToObject) {
  for (std::int64_t seed = 0; seed < 30; ++seed) {
    MiniWorld w;
    w.reset(make_task_spec("pick_and_place", "apple", "drawer 1", seed));
    const auto r = where_is(w, "apple 1");
    if (r == "countertop 1") continue;
    EXPECT_EQ(w.expert_action(), "go to " + r);
  }
}

TEST(Expert, SolvesEverySpecWithinTwelveSteps) {
  for (const auto& s : every_spec(7)) {
    MiniWorld w;
    w.reset(s);
    StepResult r;
    int heats = 0;
    for (int i = 0; i < 12 && !r.done; ++i) {
      const auto a = w.expert_action();
      if (a.rfind("heat ", 0) == 0) {
        ++heats;
        EXPECT_NE(a.find(" with microwave 1"), std::string::npos);
      }
      r = w.step(a);
    }
    EXPECT_TRUE(r.success) << describe_task(s) << " seed " << s.seed;
    EXPECT_EQ(heats, s.task_type == "pick_heat_then_place" ? 1 : 0);
  }
}

TEST(Budget, ScienceWorldTableAndDefault) {
  EXPECT_EQ(default_max_steps("mini", "pick_and_place"), 50);
  EXPECT_EQ(default_max_steps("alfworld", "pick_two_obj_and_place"), 50);
  EXPECT_GT(default_max_steps("scienceworld", "boil"), 0);
}

TEST(Specs, EnumerationCoversCatalog) {
  const auto easy = enumerate_task_specs(Split::easy, 1);
  EXPECT_EQ(easy.size(), MiniWorld::objects_for("pick_and_place").size() * MiniWorld::target_receptacles().size());
  for (const auto& s : easy) EXPECT_EQ(s.split, Split::easy);
  EXPECT_EQ(enumerate_task_specs(Split::hard, 1), enumerate_task_specs(Split::hard, 1));
  const auto sample = sample_task_specs(Split::hard, 20, 3);
  EXPECT_EQ(sample.size(), 20u);
  EXPECT_EQ(sample, sample_task_specs(Split::hard, 20, 3));
  EXPECT_NE(sample, sample_task_specs(Split::hard, 20, 4));
}

}  // namespace
}  // namespace exprag
