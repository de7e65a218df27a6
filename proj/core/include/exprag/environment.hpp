#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "exprag/trajectory.hpp"

namespace exprag {

namespace task_types {
inline constexpr std::string_view kPickAndPlace = "pick_and_place";
inline constexpr std::string_view kPickHeatThenPlace = "pick_heat_then_place";
inline constexpr std::string_view kPickCoolThenPlace = "pick_cool_then_place";
inline constexpr std::string_view kPickTwoAndPlace = "pick_two_and_place";
}  // namespace task_types

inline constexpr std::string_view kMiniWorldName = "mini";
inline constexpr std::string_view kNothingHappens = "Nothing happens.";
inline constexpr int kDefaultMaxSteps = 50;

struct TaskSpec {
  std::string task_type;
  std::string object;
  std::string receptacle;
  std::optional<std::string> second_object;
  Split split = Split::easy;
  std::int64_t seed = 0;
  std::int64_t variation_id = 0;

  bool operator==(const TaskSpec&) const = default;
};

// Fills split (from the task-type table), second_object and variation_id.
// Throws ValidationError for task types the mini-world does not know.
TaskSpec make_task_spec(std::string_view task_type, std::string object, std::string receptacle,
                        std::int64_t seed);

std::string describe_task(const TaskSpec& spec);

// Recovers (task type, object, receptacle) from a task description such as
// "heat some mug and put it in drawer 1.". A receptacle without an instance
// number resolves to instance 1.
struct ParsedTask {
  std::string task_type;
  std::string object;
  std::string receptacle;

  bool operator==(const ParsedTask&) const = default;
};
std::optional<ParsedTask> parse_task_description(std::string_view description);

// The text after "Your task is to: " in an initial observation, if present.
std::optional<std::string> extract_task_description(std::string_view observation);

struct StepResult {
  std::string observation;
  bool done = false;
  bool success = false;
  double score = 0.0;

  bool operator==(const StepResult&) const = default;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string env_name() const = 0;
  virtual std::string reset(const TaskSpec& spec) = 0;
  // Throws ContractError once the episode is done.
  virtual StepResult step(std::string_view action) = 0;
};

struct EnvState {
  std::map<std::string, std::vector<std::string>> contents;  // receptacle -> object instances
  std::string location;
  std::optional<std::string> inventory;
  std::set<std::string> open;
  std::set<std::string> heated;
  std::set<std::string> cooled;
  std::set<std::string> cleaned;
  int steps = 0;
  bool done = false;
  bool success = false;

  bool operator==(const EnvState&) const = default;
};

// Deterministic ALFWorld-style household with eight fixed receptacles.
// Placement generator v1: std::mt19937_64 seeded with the spec seed, choices
// taken as raw engine output modulo the candidate count.
class MiniWorld final : public Environment {
 public:
  static constexpr std::string_view kStartLocation = "countertop 1";

  static const std::vector<std::string>& receptacles();         // lexicographic
  static const std::vector<std::string>& target_receptacles();  // valid placement targets
  static const std::vector<std::string>& objects_for(std::string_view task_type);
  static bool openable(std::string_view receptacle);

  std::string env_name() const override { return std::string(kMiniWorldName); }
  std::string reset(const TaskSpec& spec) override;
  StepResult step(std::string_view action) override;

  // Shortest scripted solution step from the ground-truth state.
  std::string expert_action() const;

  const EnvState& state() const noexcept { return state_; }
  const TaskSpec& spec() const noexcept { return spec_; }

 private:
  std::string describe_receptacle(const std::string& receptacle) const;
  std::string apply(std::string_view action);
  bool goal_reached() const;
  std::vector<std::string> required_instances() const;

  TaskSpec spec_;
  EnvState state_;
  bool has_reset_ = false;
};

// Per-task step budget: ScienceWorld task-dependent table, 50 elsewhere.
int default_max_steps(std::string_view env_name, std::string_view task_type);

std::vector<std::string_view> mini_task_types(Split split);

// Every (task type, object, target) combination of a split, one seeded
// variation each. Used to populate training stores.
std::vector<TaskSpec> enumerate_task_specs(Split split, std::uint64_t seed);

// `count` specs of a split drawn with a seeded generator.
std::vector<TaskSpec> sample_task_specs(Split split, std::size_t count, std::uint64_t seed);

// Child-process engine speaking line-delimited JSON over stdin/stdout.
struct LaunchSpec {
  std::vector<std::string> argv;
  std::string env_name = "external";
  std::chrono::milliseconds timeout{10000};
};

struct ProtocolExchange {
  std::int64_t request_id = 0;
  std::int64_t reply_id = 0;
  std::string request;
  std::string reply;
};

class ExternalEnvironment final : public Environment {
 public:
  ~ExternalEnvironment() override;
  ExternalEnvironment(const ExternalEnvironment&) = delete;
  ExternalEnvironment& operator=(const ExternalEnvironment&) = delete;

  std::string env_name() const override { return launch_.env_name; }
  std::string reset(const TaskSpec& spec) override;
  StepResult step(std::string_view action) override;

  const std::vector<ProtocolExchange>& protocol_log() const noexcept { return log_; }

 private:
  friend std::unique_ptr<ExternalEnvironment> connect_external(const LaunchSpec& launch);
  ExternalEnvironment(LaunchSpec launch, int pid, int fd);

  StepResult exchange(const std::string& cmd, const std::string& payload_json);
  std::string read_line();

  LaunchSpec launch_;
  int pid_;
  int fd_;
  std::string buffer_;
  std::int64_t next_id_ = 1;
  bool answered_ = false;
  bool done_ = false;
  std::vector<ProtocolExchange> log_;
};

// Throws HandshakeError when the child cannot be started.
std::unique_ptr<ExternalEnvironment> connect_external(const LaunchSpec& launch);

}  // namespace exprag
