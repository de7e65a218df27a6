#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exprag {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

// One chat turn. Observations live in user turns, actions in assistant turns.
struct Turn {
  Role role = Role::user;
  std::string content;

  bool operator==(const Turn&) const = default;
};

// Chat messages handed to a policy share the turn representation.
using ChatMessage = Turn;

struct Outcome {
  bool success = false;
  double score = 0.0;

  bool operator==(const Outcome&) const = default;
};

enum class Split { easy, hard };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

// Declared task-type -> split table covering the built-in mini-world and the
// ALFWorld / ScienceWorld task families. Returns nullopt for unknown types.
std::optional<Split> split_for_task_type(std::string_view task_type);

struct TaskMeta {
  std::string env_name;
  std::string task_type;
  Split split = Split::easy;
  std::int64_t variation_id = 0;
  std::int64_t seed = 0;

  bool operator==(const TaskMeta&) const = default;
};

struct Trajectory {
  std::string id;
  TaskMeta meta;
  std::string task_description;
  std::vector<Turn> turns;
  // nullopt marks a pending outcome (a prefix of an unfinished episode).
  std::optional<Outcome> outcome;

  bool operator==(const Trajectory&) const = default;

  std::size_t user_turn_count() const;
  bool has_system_turn() const { return !turns.empty() && turns.front().role == Role::system; }
};

// Throws ValidationError when the turn structure or metadata is inconsistent.
void validate(const Trajectory& traj);

enum class TrajectoryFormat { chat_json, agentic_json, compact_json, textual };

std::string_view to_string(TrajectoryFormat fmt);
// Throws FormatError for unknown tags.
TrajectoryFormat format_from_string(std::string_view tag);

// Display serialization used for memory blocks and retrieval keys.
std::string format_trajectory(const Trajectory& traj, TrajectoryFormat fmt);
std::string format_turns(const std::vector<Turn>& turns, TrajectoryFormat fmt);

// Store record (one JSONL line, no trailing newline).
std::string serialize_trajectory_record(const Trajectory& traj);
Trajectory parse_trajectory_record(std::string_view line);

// History h_t: turns up to and including the t-th observation. Outcome is pending.
Trajectory partial_history(const Trajectory& traj, std::size_t t);

std::vector<Trajectory> read_store(const std::filesystem::path& path);
void write_store(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);

}  // namespace exprag
