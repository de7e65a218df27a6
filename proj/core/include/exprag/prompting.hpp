#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exprag/trajectory.hpp"

namespace exprag {

inline constexpr std::string_view kSuccessfulHeader = "These are examples of successful trajectories: ";
inline constexpr std::string_view kUnsuccessfulHeader = "These are examples of unsuccessful trajectories: ";

// Retrieved experience inserted into the system prompt.
struct MemoryBlock {
  std::vector<std::string> successful;
  std::vector<std::string> unsuccessful;
  TrajectoryFormat fmt = TrajectoryFormat::chat_json;
  std::string rendered;

  bool empty() const noexcept { return rendered.empty(); }
  bool operator==(const MemoryBlock&) const = default;
};

struct RetrievedTrajectory {
  const Trajectory* trajectory = nullptr;
  double score = 0.0;
};

struct PromptTemplate {
  std::string env_name;
  std::string system_text;
};

// Shipped system prompts: "mini", "alfworld", "scienceworld".
PromptTemplate builtin_template(std::string_view env_name);
// Reads <dir>/<env_name>.txt, dropping trailing newlines.
PromptTemplate load_template(const std::filesystem::path& dir, std::string_view env_name);

// Task description used verbatim. Throws ValidationError when empty.
std::string build_static_query(std::string_view task_description);
// chat_json of the history prefix. Throws ValidationError when it has no turns.
std::string build_dynamic_query(const Trajectory& history);

MemoryBlock build_memory_block(std::span<const RetrievedTrajectory> retrieved,
                               TrajectoryFormat fmt = TrajectoryFormat::chat_json);

std::string compose_system_message(const PromptTemplate& tmpl, const MemoryBlock& memory);

// System message followed by the history turns. The history must end in a
// user turn; its own leading system turn, if any, is replaced.
std::vector<ChatMessage> assemble_context(const PromptTemplate& tmpl, const MemoryBlock& memory,
                                          const Trajectory& history);

// Inverse of the memory block rendering, used by the local policies to read
// retrieved experience back out of a system message.
struct ParsedMemory {
  std::vector<std::vector<Turn>> successful;
  std::vector<std::vector<Turn>> unsuccessful;
};

ParsedMemory parse_memory_block(std::string_view system_message,
                                TrajectoryFormat fmt = TrajectoryFormat::chat_json);

// Parses a single display-formatted trajectory back into turns.
std::vector<Turn> parse_formatted_turns(std::string_view text, TrajectoryFormat fmt);

}  // namespace exprag
