#include <gtest/gtest.h>

#include "exprag/environment.hpp"
#include "exprag/error.hpp"
#include "exprag/policy.hpp"
#include "exprag/rollout.hpp"

namespace exprag {
namespace {

LaunchSpec stub(const std::string& mode, int timeout_ms = 5000) {
  return LaunchSpec{{EXPRAG_STUB_ENV, mode}, "stub", std::chrono::milliseconds(timeout_ms)};
}

const TaskSpec kSpec = make_task_spec("pick_and_place", "apple", "drawer 1", 3);

TEST(External, EchoResetIsVerbatim) {
  auto env = connect_external(stub("echo"));
  EXPECT_EQ(env->reset(kSpec), "stub ready: pick_and_place");
  EXPECT_EQ(env->env_name(), "stub");
  const auto r = env->step("go to \"shelf\" 1");
  EXPECT_EQ(r.observation, "echo: go to \"shelf\" 1");
  EXPECT_FALSE(r.done);
}

TEST(External, IdsIncreaseAndMatchOverHundredSteps) {
  auto env = connect_external(stub("echo"));
  env->reset(kSpec);
  for (int i = 0; i < 100; ++i) env->step("look");
  const auto& log = env->protocol_log();
  ASSERT_EQ(log.size(), 101u);
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].request_id, log[i].reply_id);
    if (i > 0) {
      EXPECT_GT(log[i].request_id, log[i - 1].request_id);
    }
  }
}

TEST(External, StepAfterDoneIsContractError) {
  auto env = connect_external(stub("echo"));
  env->reset(kSpec);
  EXPECT_TRUE(env->step("finish").success);
  EXPECT_THROW(env->step("look"), ContractError);
}

TEST(External, MalformedReplyCarriesRawLine) {
  auto env = connect_external(stub("malformed"));
  try {
    env->reset(kSpec);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.raw_line(), "this is not json {");
  }
}

TEST(External, MismatchedIdIsProtocolError) {
  auto env = connect_external(stub("wrong-id"));
  EXPECT_THROW(env->reset(kSpec), ProtocolError);
}

TEST(External, SilentEngineTimesOut) {
  auto env = connect_external(stub("silent", 300));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(env->reset(kSpec), TimeoutError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(External, EarlyExitIsHandshakeError) {
  auto env = connect_external(stub("exit"));
  EXPECT_THROW(env->reset(kSpec), HandshakeError);
}

TEST(External, MissingBinaryIsHandshakeError) {
  EXPECT_THROW(connect_external(LaunchSpec{{"/nonexistent/engine"}, "x", std::chrono::milliseconds(500)}),
               HandshakeError);
  EXPECT_THROW(connect_external(LaunchSpec{{}, "x", std::chrono::milliseconds(500)}), HandshakeError);
}

// The proxied mini-world must play out exactly like the in-process one.
TEST(External, ProxiedMiniWorldMatchesInProcess) {
  const auto policy = std::make_unique<NaivePlacer>();
  EpisodeConfig cfg;
  cfg.prompt = builtin_template("mini");
  const auto specs = sample_task_specs(Split::easy, 3, 12);
  for (const auto& spec : specs) {
    auto remote = connect_external(stub("mini"));
    MiniWorld local;
    const auto a = run_episode(*remote, *policy, spec, cfg);
    const auto b = run_episode(local, *policy, spec, cfg);
    EXPECT_EQ(a.trajectory.turns, b.trajectory.turns);
    EXPECT_EQ(a.success, b.success);
  }
}

}  // namespace
}  // namespace exprag
