#include "exprag/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <utility>

#include "exprag/error.hpp"

namespace exprag {

namespace {

struct BuiltinPrompt {
  std::string_view env_name;
  std::string_view text;
};

constexpr BuiltinPrompt kBuiltinPrompts[] = {
#include "builtin_prompts.inc"
};

std::string strip_trailing_newlines(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

// End offset of the JSON value starting at `begin` (an opening bracket).
std::size_t json_value_end(std::string_view text, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[' || c == '{') ++depth;
    else if (c == ']' || c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

Turn turn_from_json(const nlohmann::json& obj, TrajectoryFormat fmt) {
  if (!obj.is_object()) throw ParseError("<memory>", "trajectory item is not an object");
  if (fmt == TrajectoryFormat::compact_json) {
    if (obj.size() != 1) throw ParseError("<memory>", "compact item must have one key");
    const auto& [key, value] = *obj.items().begin();
    Role role = key == "action" ? Role::assistant : key == "observation" ? Role::user : Role::system;
    return Turn{role, value.get<std::string>()};
  }
  const std::string role = obj.at("role").get<std::string>();
  Role r = Role::system;
  if (role == "assistant" || role == "action") r = Role::assistant;
  else if (role == "user" || role == "observation") r = Role::user;
  return Turn{r, obj.at("content").get<std::string>()};
}

std::vector<std::vector<Turn>> parse_group(std::string_view region, TrajectoryFormat fmt) {
  std::vector<std::vector<Turn>> out;
  if (fmt == TrajectoryFormat::textual) {
    // Trajectories open and close on a user turn, so two consecutive "User:"
    // lines mark the boundary between two items.
    std::vector<Turn> current;
    std::istringstream lines{std::string(region)};
    std::string line;
    while (std::getline(lines, line)) {
      std::optional<Role> role;
      std::size_t skip = 0;
      if (line.starts_with("User: ")) role = Role::user, skip = 6;
      else if (line.starts_with("Assistant: ")) role = Role::assistant, skip = 11;
      else if (line.starts_with("System: ")) role = Role::system, skip = 8;
      if (!role) {
        if (!current.empty()) current.back().content += "\n" + line;
        continue;
      }
      if (*role == Role::user && !current.empty() && current.back().role == Role::user) {
        out.push_back(std::move(current));
        current.clear();
      }
      current.push_back(Turn{*role, line.substr(skip)});
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
  }
  std::size_t pos = 0;
  while ((pos = region.find('[', pos)) != std::string_view::npos) {
    const std::size_t end = json_value_end(region, pos);
    if (end == std::string_view::npos) break;
    try {
      const auto arr = nlohmann::json::parse(region.substr(pos, end - pos));
      std::vector<Turn> turns;
      for (const auto& item : arr) turns.push_back(turn_from_json(item, fmt));
      out.push_back(std::move(turns));
    } catch (const nlohmann::json::exception&) {
      // Not a serialized trajectory; skip past it.
    }
    pos = end;
  }
  return out;
}

}  // namespace

PromptTemplate builtin_template(std::string_view env_name) {
  for (const auto& p : kBuiltinPrompts) {
    if (p.env_name == env_name) return PromptTemplate{std::string(env_name), strip_trailing_newlines(std::string(p.text))};
  }
  throw ConfigError("no built-in prompt for environment '" + std::string(env_name) + "'");
}

PromptTemplate load_template(const std::filesystem::path& dir, std::string_view env_name) {
  const auto path = dir / (std::string(env_name) + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate{std::string(env_name), strip_trailing_newlines(buf.str())};
}

std::string build_static_query(std::string_view task_description) {
  if (task_description.empty()) throw ValidationError("static query needs a task description");
  return std::string(task_description);
}

std::string build_dynamic_query(const Trajectory& history) {
  if (history.turns.empty()) throw ValidationError("dynamic query needs a non-empty history");
  return format_trajectory(history, TrajectoryFormat::chat_json);
}

MemoryBlock build_memory_block(std::span<const RetrievedTrajectory> retrieved, TrajectoryFormat fmt) {
  std::vector<RetrievedTrajectory> ordered(retrieved.begin(), retrieved.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RetrievedTrajectory& a, const RetrievedTrajectory& b) { return a.score > b.score; });

  MemoryBlock block;
  block.fmt = fmt;
  for (const auto& r : ordered) {
    const bool success = r.trajectory->outcome && r.trajectory->outcome->success;
    (success ? block.successful : block.unsuccessful).push_back(format_trajectory(*r.trajectory, fmt));
  }
  if (!block.successful.empty()) {
    block.rendered += kSuccessfulHeader;
    block.rendered += join(block.successful, "\n");
    block.rendered += '.';
  }
  if (!block.unsuccessful.empty()) {
    if (!block.rendered.empty()) block.rendered += ' ';
    block.rendered += kUnsuccessfulHeader;
    block.rendered += join(block.unsuccessful, "\n");
    block.rendered += '.';
  }
  return block;
}

std::string compose_system_message(const PromptTemplate& tmpl, const MemoryBlock& memory) {
  if (memory.rendered.empty()) return tmpl.system_text;
  return tmpl.system_text + "\n\n" + memory.rendered;
}

std::vector<ChatMessage> assemble_context(const PromptTemplate& tmpl, const MemoryBlock& memory,
                                          const Trajectory& history) {
  if (history.turns.empty() || history.turns.back().role != Role::user) {
    throw ValidationError("context history must end with a user turn");
  }
  std::vector<ChatMessage> context;
  context.reserve(history.turns.size() + 1);
  context.push_back(ChatMessage{Role::system, compose_system_message(tmpl, memory)});
  for (const auto& turn : history.turns) {
    if (turn.role == Role::system) continue;
    context.push_back(turn);
  }
  return context;
}

std::vector<Turn> parse_formatted_turns(std::string_view text, TrajectoryFormat fmt) {
  auto groups = parse_group(text, fmt);
  if (groups.empty()) return {};
  return std::move(groups.front());
}

ParsedMemory parse_memory_block(std::string_view system_message, TrajectoryFormat fmt) {
  ParsedMemory parsed;
  const std::size_t s = system_message.find(kSuccessfulHeader);
  const std::size_t u = system_message.find(kUnsuccessfulHeader, s == std::string_view::npos ? 0 : s);
  auto strip_period = [](std::string_view region) {
    if (!region.empty() && region.back() == ' ') region.remove_suffix(1);
    if (!region.empty() && region.back() == '.') region.remove_suffix(1);
    return region;
  };
  if (s != std::string_view::npos) {
    const std::size_t begin = s + kSuccessfulHeader.size();
    const std::size_t end = u == std::string_view::npos ? system_message.size() : u;
    parsed.successful = parse_group(strip_period(system_message.substr(begin, end - begin)), fmt);
  }
  if (u != std::string_view::npos) {
    parsed.unsuccessful = parse_group(strip_period(system_message.substr(u + kUnsuccessfulHeader.size())), fmt);
  }
  return parsed;
}

}  // namespace exprag
