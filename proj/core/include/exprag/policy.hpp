#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exprag/endpoint.hpp"
#include "exprag/trajectory.hpp"

namespace exprag {

enum class PolicyKind { remote_chat, memory_follower, naive_placer };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view text);

inline constexpr std::string_view kInvalidActionSentinel = "look";

struct PolicyConfig {
  PolicyKind kind = PolicyKind::naive_placer;
  EndpointConfig endpoint;  // remote_chat only; decoding is always greedy
  std::size_t max_action_chars = 256;
  // Display format of trajectories inside the memory block (local policies
  // parse it back out of the system message).
  TrajectoryFormat memory_fmt = TrajectoryFormat::chat_json;
};

// First line of a reply, trimmed and cut to max_chars. An empty result maps to
// the sentinel "look".
std::string normalize_action(std::string_view reply, std::size_t max_chars);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  // The context is the system message followed by alternating user/assistant
  // turns ending in a user turn. Implementations are safe to call from several
  // threads at once.
  //
  // Remote backends throw PolicyUnavailable once retries are spent and
  // PolicyError for replies that cannot be read.
  virtual std::string decide_action(const std::vector<ChatMessage>& context) const = 0;
};

// One step of a local policy's plan.
struct PlanOp {
  enum class Kind { acquire, apply, place };
  Kind kind = Kind::acquire;
  std::string verb;    // apply: heat / cool / clean
  std::string target;  // acquire: object name; apply: appliance; place: receptacle

  bool operator==(const PlanOp&) const = default;
};

// Searches receptacles in lexicographic order for the task object, then
// delivers it. Never heats, cools or cleans.
class NaivePlacer final : public Policy {
 public:
  explicit NaivePlacer(std::size_t max_action_chars = 256) : max_chars_(max_action_chars) {}
  std::string name() const override { return "naive_placer"; }
  std::string decide_action(const std::vector<ChatMessage>& context) const override;

 private:
  std::size_t max_chars_;
};

// Replays the post-acquisition actions of the first successful retrieved
// trajectory whose task type matches, with object and receptacle substituted.
// Falls back to NaivePlacer when the memory holds no match.
class MemoryFollower final : public Policy {
 public:
  explicit MemoryFollower(TrajectoryFormat memory_fmt = TrajectoryFormat::chat_json,
                          std::size_t max_action_chars = 256)
      : fmt_(memory_fmt), max_chars_(max_action_chars) {}
  std::string name() const override { return "memory_follower"; }
  std::string decide_action(const std::vector<ChatMessage>& context) const override;

  // The plan the follower would execute for this context.
  std::vector<PlanOp> plan(const std::vector<ChatMessage>& context) const;

 private:
  TrajectoryFormat fmt_;
  std::size_t max_chars_;
};

class RemoteChatPolicy final : public Policy {
 public:
  explicit RemoteChatPolicy(EndpointConfig endpoint, std::size_t max_action_chars = 256);
  static std::unique_ptr<RemoteChatPolicy> from_env(std::size_t max_action_chars = 256);

  std::string name() const override { return "remote_chat:" + client_.config().model; }
  std::string decide_action(const std::vector<ChatMessage>& context) const override;

  // Request body sent for a context.
  nlohmann::json request_body(const std::vector<ChatMessage>& context) const;

 private:
  JsonEndpointClient client_;
  std::size_t max_chars_;
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config);

// Compiles a successful trajectory's actions into a plan for another task of
// the same type. Exposed for tests.
std::vector<PlanOp> compile_plan(const std::vector<Turn>& turns, std::string_view object,
                                 std::string_view receptacle);

}  // namespace exprag
