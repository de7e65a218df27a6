#include "exprag/trajectory.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <utility>

#include "exprag/error.hpp"

namespace exprag {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::pair<std::string_view, Split>, 40> kSplitTable{{
    // built-in mini-world
    {"pick_and_place", Split::easy},
    {"pick_heat_then_place", Split::hard},
    {"pick_cool_then_place", Split::hard},
    {"pick_two_and_place", Split::hard},
    // ALFWorld
    {"look_at_obj_in_light", Split::easy},
    {"pick_clean_then_place_in_recep", Split::easy},
    {"pick_and_place_simple", Split::easy},
    {"pick_cool_then_place_in_recep", Split::hard},
    {"pick_heat_then_place_in_recep", Split::hard},
    {"pick_two_obj_and_place", Split::hard},
    // ScienceWorld
    {"find-plant", Split::easy},
    {"freeze", Split::easy},
    {"inclined-plane-friction-unnamed-surfaces", Split::easy},
    {"lifespan-longest-lived", Split::easy},
    {"lifespan-longest-lived-then-shortest-lived", Split::easy},
    {"inclined-plane-friction-named-surfaces", Split::easy},
    {"boil", Split::easy},
    {"change-the-state-of-matter-of", Split::easy},
    {"inclined-plane-determine-angle", Split::easy},
    {"measure-melting-point-known-substance", Split::easy},
    {"measure-melting-point-unknown-substance", Split::easy},
    {"use-thermometer", Split::easy},
    {"find-non-living-thing", Split::easy},
    {"melt", Split::easy},
    {"find-animal", Split::easy},
    {"lifespan-shortest-lived", Split::easy},
    {"find-living-thing", Split::easy},
    {"chemistry-mix-paint-secondary-color", Split::hard},
    {"test-conductivity", Split::hard},
    {"power-component-renewable-vs-nonrenewable-energy", Split::hard},
    {"chemistry-mix-paint-tertiary-color", Split::hard},
    {"identify-life-stages-1", Split::hard},
    {"identify-life-stages-2", Split::hard},
    {"test-conductivity-of-unknown-substances", Split::hard},
    {"grow-fruit", Split::hard},
    {"mendelian-genetics-known-plant", Split::hard},
    {"power-component", Split::hard},
    {"grow-plant", Split::hard},
    {"mendelian-genetics-unknown-plant", Split::hard},
    {"chemistry-mix", Split::hard},
}};

// JSON string literal, UTF-8 kept as-is.
std::string quoted(const std::string& text) {
  return nlohmann::json(text).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string_view display_key(Role role, TrajectoryFormat fmt) {
  if (fmt == TrajectoryFormat::chat_json) return to_string(role);
  switch (role) {
    case Role::assistant: return "action";
    case Role::user: return "observation";
    case Role::system: return "system";
  }
  return "system";
}

std::string_view textual_prefix(Role role) {
  switch (role) {
    case Role::assistant: return "Assistant: ";
    case Role::user: return "User: ";
    case Role::system: return "System: ";
  }
  return "System: ";
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + key, "missing field");
  return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + key, "expected string");
  return v.get<std::string>();
}

std::int64_t require_int(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) throw ParseError(path + key, "expected integer");
  return v.get<std::int64_t>();
}

void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                         const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(path + key, "unknown field");
    }
  }
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  throw ValidationError("invalid role '" + std::string(text) + "'");
}

std::string_view to_string(Split split) { return split == Split::easy ? "easy" : "hard"; }

Split split_from_string(std::string_view text) {
  if (text == "easy") return Split::easy;
  if (text == "hard") return Split::hard;
  throw ValidationError("invalid split '" + std::string(text) + "'");
}

std::optional<Split> split_for_task_type(std::string_view task_type) {
  for (const auto& [name, split] : kSplitTable) {
    if (name == task_type) return split;
  }
  return std::nullopt;
}

std::size_t Trajectory::user_turn_count() const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.role == Role::user; }));
}

void validate(const Trajectory& traj) {
  if (traj.id.empty()) throw ValidationError("trajectory id is empty");
  std::size_t first = traj.has_system_turn() ? 1 : 0;
  for (std::size_t i = first; i < traj.turns.size(); ++i) {
    const Turn& turn = traj.turns[i];
    Role expected = ((i - first) % 2 == 0) ? Role::user : Role::assistant;
    if (turn.role == Role::system) {
      throw ValidationError("system turn at position " + std::to_string(i) + " in " + traj.id);
    }
    if (turn.role != expected) {
      throw ValidationError("turns do not alternate user/assistant at position " +
                            std::to_string(i) + " in " + traj.id);
    }
    if (turn.content.empty()) {
      throw ValidationError("empty " + std::string(to_string(turn.role)) + " turn at position " +
                            std::to_string(i) + " in " + traj.id);
    }
  }
  if (traj.outcome) {
    const Outcome& o = *traj.outcome;
    if (!(o.score >= -1.0 && o.score <= 1.0)) {
      throw ValidationError("outcome score outside [-1, 1] in " + traj.id);
    }
    if (o.success && o.score != 1.0) {
      throw ValidationError("successful outcome must carry score 1 in " + traj.id);
    }
  }
  if (auto declared = split_for_task_type(traj.meta.task_type);
      declared && *declared != traj.meta.split) {
    throw ValidationError("split '" + std::string(to_string(traj.meta.split)) +
                          "' contradicts task type '" + traj.meta.task_type + "' in " + traj.id);
  }
}

std::string_view to_string(TrajectoryFormat fmt) {
  switch (fmt) {
    case TrajectoryFormat::chat_json: return "chat_json";
    case TrajectoryFormat::agentic_json: return "agentic_json";
    case TrajectoryFormat::compact_json: return "compact_json";
    case TrajectoryFormat::textual: return "textual";
  }
  return "chat_json";
}

TrajectoryFormat format_from_string(std::string_view tag) {
  if (tag == "chat_json") return TrajectoryFormat::chat_json;
  if (tag == "agentic_json") return TrajectoryFormat::agentic_json;
  if (tag == "compact_json") return TrajectoryFormat::compact_json;
  if (tag == "textual") return TrajectoryFormat::textual;
  throw FormatError("unsupported trajectory format '" + std::string(tag) + "'");
}

std::string format_turns(const std::vector<Turn>& turns, TrajectoryFormat fmt) {
  std::string out;
  if (fmt == TrajectoryFormat::textual) {
    for (std::size_t i = 0; i < turns.size(); ++i) {
      if (i > 0) out += '\n';
      out += textual_prefix(turns[i].role);
      out += turns[i].content;
    }
    return out;
  }
  out += '[';
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) out += ", ";
    const Turn& turn = turns[i];
    out += '{';
    if (fmt == TrajectoryFormat::compact_json) {
      out += quoted(std::string(display_key(turn.role, fmt)));
      out += ": ";
    } else {
      out += "\"role\": ";
      out += quoted(std::string(display_key(turn.role, fmt)));
      out += ", \"content\": ";
    }
    out += quoted(turn.content);
    out += '}';
  }
  out += ']';
  return out;
}

std::string format_trajectory(const Trajectory& traj, TrajectoryFormat fmt) {
  return format_turns(traj.turns, fmt);
}

std::string serialize_trajectory_record(const Trajectory& traj) {
  ordered_json rec;
  rec["id"] = traj.id;
  ordered_json meta;
  meta["env_name"] = traj.meta.env_name;
  meta["task_type"] = traj.meta.task_type;
  meta["split"] = std::string(to_string(traj.meta.split));
  meta["variation_id"] = traj.meta.variation_id;
  meta["seed"] = traj.meta.seed;
  rec["meta"] = std::move(meta);
  rec["task_description"] = traj.task_description;
  ordered_json turns = ordered_json::array();
  for (const Turn& t : traj.turns) {
    ordered_json turn;
    turn["role"] = std::string(to_string(t.role));
    turn["content"] = t.content;
    turns.push_back(std::move(turn));
  }
  rec["turns"] = std::move(turns);
  if (traj.outcome) {
    ordered_json outcome;
    outcome["success"] = traj.outcome->success;
    outcome["score"] = traj.outcome->score;
    rec["outcome"] = std::move(outcome);
  } else {
    rec["outcome"] = nullptr;
  }
  return rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Trajectory parse_trajectory_record(std::string_view line) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("<record>", e.what());
  }
  if (!rec.is_object()) throw ParseError("<record>", "expected JSON object");
  reject_unknown_keys(rec, {"id", "meta", "task_description", "turns", "outcome"}, "");

  Trajectory traj;
  traj.id = require_string(rec, "id", "");

  const auto& meta = require(rec, "meta", "");
  if (!meta.is_object()) throw ParseError("meta", "expected object");
  reject_unknown_keys(meta, {"env_name", "task_type", "split", "variation_id", "seed"}, "meta.");
  traj.meta.env_name = require_string(meta, "env_name", "meta.");
  traj.meta.task_type = require_string(meta, "task_type", "meta.");
  traj.meta.split = split_from_string(require_string(meta, "split", "meta."));
  traj.meta.variation_id = require_int(meta, "variation_id", "meta.");
  traj.meta.seed = require_int(meta, "seed", "meta.");

  traj.task_description = require_string(rec, "task_description", "");

  const auto& turns = require(rec, "turns", "");
  if (!turns.is_array()) throw ParseError("turns", "expected array");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const std::string path = "turns[" + std::to_string(i) + "].";
    const auto& turn = turns[i];
    if (!turn.is_object()) throw ParseError("turns[" + std::to_string(i) + "]", "expected object");
    reject_unknown_keys(turn, {"role", "content"}, path);
    Turn t;
    t.role = role_from_string(require_string(turn, "role", path));
    t.content = require_string(turn, "content", path);
    traj.turns.push_back(std::move(t));
  }

  const auto& outcome = require(rec, "outcome", "");
  if (!outcome.is_null()) {
    if (!outcome.is_object()) throw ParseError("outcome", "expected object or null");
    reject_unknown_keys(outcome, {"success", "score"}, "outcome.");
    const auto& success = require(outcome, "success", "outcome.");
    if (!success.is_boolean()) throw ParseError("outcome.success", "expected boolean");
    const auto& score = require(outcome, "score", "outcome.");
    if (!score.is_number()) throw ParseError("outcome.score", "expected number");
    traj.outcome = Outcome{success.get<bool>(), score.get<double>()};
  }

  validate(traj);
  return traj;
}

Trajectory partial_history(const Trajectory& traj, std::size_t t) {
  const std::size_t users = traj.user_turn_count();
  if (t > users) {
    throw RangeError("step " + std::to_string(t) + " out of range [0, " + std::to_string(users) +
                     "] for " + traj.id);
  }
  Trajectory prefix;
  prefix.id = traj.id;
  prefix.meta = traj.meta;
  prefix.task_description = traj.task_description;
  std::size_t keep = traj.has_system_turn() ? 1 : 0;
  if (t > 0) keep += 2 * t - 1;
  prefix.turns.assign(traj.turns.begin(), traj.turns.begin() + static_cast<std::ptrdiff_t>(keep));
  return prefix;
}

std::vector<Trajectory> read_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory store " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_trajectory_record(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ":" + e.field(), e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_store(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trajectory store " + path.string());
  for (const auto& traj : trajectories) {
    out << serialize_trajectory_record(traj) << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace exprag
