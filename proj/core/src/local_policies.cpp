#include <algorithm>
#include <map>
#include <set>

#include "exprag/environment.hpp"
#include "exprag/error.hpp"
#include "exprag/policy.hpp"
#include "exprag/prompting.hpp"
#include "text_util.hpp"

namespace exprag {

namespace {

using text::after_prefix;
using text::split_once;
using text::trim;

std::string_view base_name(std::string_view instance) {
  const auto space = instance.rfind(' ');
  if (space == std::string_view::npos) return instance;
  const auto tail = instance.substr(space + 1);
  const bool numbered = !tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; });
  return numbered ? instance.substr(0, space) : instance;
}

// "nothing" | "a x 1" | "a x 1, and a y 1" | "a x 1, a y 1, and a z 1"
std::vector<std::string> parse_object_list(std::string_view list) {
  std::vector<std::string> out;
  list = trim(list);
  if (list == "nothing" || list.empty()) return out;
  while (!list.empty()) {
    const auto comma = list.find(", ");
    std::string_view item = comma == std::string_view::npos ? list : list.substr(0, comma);
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 2);
    item = trim(item);
    if (auto rest = after_prefix(item, "and ")) item = *rest;
    if (auto rest = after_prefix(item, "a ")) item = *rest;
    else if (auto rest = after_prefix(item, "an ")) item = *rest;
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

// Text between `open` and the next `close`, searching from the start.
std::optional<std::string_view> between(std::string_view s, std::string_view open, std::string_view close,
                                        std::size_t* end_pos = nullptr) {
  const auto a = s.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const auto b = s.find(close, a + open.size());
  if (b == std::string_view::npos) return std::nullopt;
  if (end_pos) *end_pos = b + close.size();
  return s.substr(a + open.size(), b - a - open.size());
}

struct SuccessEvent {
  PlanOp::Kind kind;
  std::string verb;
  std::string object;
  std::string receptacle;
};

// What the agent can infer about the world from the observations so far.
struct WorldView {
  std::vector<std::string> receptacles;  // lexicographic
  std::string location;
  std::map<std::string, std::vector<std::string>> seen;
  std::set<std::string> closed;
  std::optional<std::string> inventory;
  std::vector<SuccessEvent> events;

  void observe(std::string_view obs) {
    if (auto list = between(obs, "Looking quickly around you, you see ", ".")) {
      receptacles = parse_object_list(*list);
      std::sort(receptacles.begin(), receptacles.end());
    }
    if (auto loc = between(obs, "You are at ", ".")) location = std::string(*loc);
    if (auto loc = between(obs, "You arrive at ", ".")) location = std::string(*loc);
    if (auto r = between(obs, "On the ", ", you see ")) {
      if (auto list = between(obs.substr(obs.find("On the ")), ", you see ", ".")) {
        seen[std::string(*r)] = parse_object_list(*list);
        closed.erase(std::string(*r));
      }
    }
    if (const auto pos = obs.find(" is closed."); pos != std::string_view::npos) {
      const auto start = obs.rfind("The ", pos);
      if (start != std::string_view::npos) closed.insert(std::string(obs.substr(start + 4, pos - start - 4)));
    }
    constexpr std::string_view kOpen = " is open. In it, you see ";
    if (const auto pos = obs.find(kOpen); pos != std::string_view::npos) {
      const auto start = obs.rfind("The ", pos);
      const auto stop = obs.find('.', pos + kOpen.size());
      if (start != std::string_view::npos && stop != std::string_view::npos) {
        const std::string r(obs.substr(start + 4, pos - start - 4));
        closed.erase(r);
        seen[r] = parse_object_list(obs.substr(pos + kOpen.size(), stop - pos - kOpen.size()));
      }
    }
    if (auto r = between(obs, "You close the ", ".")) closed.insert(std::string(*r));
    if (auto body = between(obs, "You pick up the ", ".")) {
      if (auto parts = split_once(*body, " from the ")) {
        const std::string o(parts->first), r(parts->second);
        inventory = o;
        auto& objs = seen[r];
        objs.erase(std::remove(objs.begin(), objs.end(), o), objs.end());
        events.push_back({PlanOp::Kind::acquire, "", o, r});
      }
    }
    if (auto body = between(obs, "You move the ", ".")) {
      if (auto parts = split_once(*body, " to the ")) {
        const std::string o(parts->first), r(parts->second);
        inventory.reset();
        auto& objs = seen[r];
        objs.push_back(o);
        std::sort(objs.begin(), objs.end());
        events.push_back({PlanOp::Kind::place, "", o, r});
      }
    }
    for (std::string_view verb : {"heat", "cool", "clean"}) {
      const std::string open = "You " + std::string(verb) + " the ";
      if (auto body = between(obs, open, ".")) {
        if (auto parts = split_once(*body, " using the ")) {
          events.push_back({PlanOp::Kind::apply, std::string(verb), std::string(parts->first),
                            std::string(parts->second)});
        }
      }
    }
  }
};

struct TaskContext {
  ParsedTask task;
  WorldView view;
};

std::optional<TaskContext> read_context(const std::vector<ChatMessage>& context) {
  if (context.empty() || context.back().role != Role::user) {
    throw ValidationError("policy context must end with a user message");
  }
  TaskContext out;
  bool have_task = false;
  for (const auto& msg : context) {
    if (msg.role != Role::user) continue;
    if (!have_task) {
      if (auto desc = extract_task_description(msg.content)) {
        if (auto parsed = parse_task_description(*desc)) {
          out.task = *parsed;
          have_task = true;
        }
      }
    }
    out.view.observe(msg.content);
  }
  if (!have_task) return std::nullopt;
  return out;
}

bool event_matches(const SuccessEvent& e, const PlanOp& op) {
  if (e.kind != op.kind) return false;
  switch (op.kind) {
    case PlanOp::Kind::acquire:
      return base_name(e.object) == op.target;
    case PlanOp::Kind::apply:
      return e.verb == op.verb;
    case PlanOp::Kind::place:
      return e.receptacle == op.target;
  }
  return false;
}

std::string acquire_step(const WorldView& v, const std::string& object, const std::string& target) {
  auto holding = [&](const std::string& r) -> std::optional<std::string> {
    const auto it = v.seen.find(r);
    if (it == v.seen.end()) return std::nullopt;
    for (const auto& o : it->second) {
      if (base_name(o) == object) return o;
    }
    return std::nullopt;
  };
  if (v.inventory) return std::string(kInvalidActionSentinel);
  const std::string& here = v.location;
  if (here != target) {
    if (auto inst = holding(here); inst && !v.closed.contains(here)) return "take " + *inst + " from " + here;
  }
  if (!v.seen.contains(here) && v.closed.contains(here)) return "open " + here;
  for (const auto& r : v.receptacles) {
    if (r != target && r != here && holding(r)) return "go to " + r;
  }
  for (const auto& r : v.receptacles) {
    if (!v.seen.contains(r) && r != here) return "go to " + r;
  }
  return std::string(kInvalidActionSentinel);
}

std::string run_plan(const std::vector<PlanOp>& plan, const TaskContext& ctx) {
  const WorldView& v = ctx.view;
  std::size_t next = 0;
  for (const auto& e : v.events) {
    if (next < plan.size() && event_matches(e, plan[next])) ++next;
  }
  if (next >= plan.size()) return std::string(kInvalidActionSentinel);
  const PlanOp& op = plan[next];
  switch (op.kind) {
    case PlanOp::Kind::acquire:
      return acquire_step(v, op.target, ctx.task.receptacle);
    case PlanOp::Kind::apply:
      if (!v.inventory) return std::string(kInvalidActionSentinel);
      if (v.location != op.target) return "go to " + op.target;
      return op.verb + " " + *v.inventory + " with " + op.target;
    case PlanOp::Kind::place:
      if (!v.inventory) return std::string(kInvalidActionSentinel);
      if (v.location != op.target) return "go to " + op.target;
      if (v.closed.contains(op.target)) return "open " + op.target;
      return "move " + *v.inventory + " to " + op.target;
  }
  return std::string(kInvalidActionSentinel);
}

std::vector<PlanOp> naive_plan(const ParsedTask& task) {
  return {PlanOp{PlanOp::Kind::acquire, "", task.object}, PlanOp{PlanOp::Kind::place, "", task.receptacle}};
}

}  // namespace

std::string normalize_action(std::string_view reply, std::size_t max_chars) {
  const auto nl = reply.find('\n');
  std::string_view line = trim(reply.substr(0, nl));
  if (line.size() > max_chars) line = trim(line.substr(0, max_chars));
  if (line.empty()) return std::string(kInvalidActionSentinel);
  return std::string(line);
}

std::vector<PlanOp> compile_plan(const std::vector<Turn>& turns, std::string_view object,
                                 std::string_view receptacle) {
  std::optional<ParsedTask> source;
  for (const auto& t : turns) {
    if (t.role != Role::user) continue;
    if (auto desc = extract_task_description(t.content)) source = parse_task_description(*desc);
    break;
  }
  auto sub_object = [&](std::string_view name) {
    return source && name == source->object ? std::string(object) : std::string(name);
  };
  auto sub_receptacle = [&](std::string_view r) {
    return source && r == source->receptacle ? std::string(receptacle) : std::string(r);
  };

  std::vector<PlanOp> plan{PlanOp{PlanOp::Kind::acquire, "", std::string(object)}};
  bool after_take = false;
  for (const auto& t : turns) {
    if (t.role != Role::assistant) continue;
    const std::string_view action = trim(t.content);
    if (!after_take) {
      after_take = action.starts_with("take ");
      continue;
    }
    if (auto rest = after_prefix(action, "take ")) {
      if (auto parts = split_once(*rest, " from ")) {
        plan.push_back({PlanOp::Kind::acquire, "", sub_object(base_name(parts->first))});
      }
    } else if (auto rest = after_prefix(action, "move ")) {
      if (auto parts = split_once(*rest, " to ")) plan.push_back({PlanOp::Kind::place, "", sub_receptacle(parts->second)});
    } else {
      for (std::string_view verb : {"heat", "cool", "clean"}) {
        if (auto r = after_prefix(action, std::string(verb) + " ")) {
          if (auto parts = split_once(*r, " with ")) {
            plan.push_back({PlanOp::Kind::apply, std::string(verb), sub_receptacle(parts->second)});
          }
          break;
        }
      }
    }
  }
  return plan;
}

std::string NaivePlacer::decide_action(const std::vector<ChatMessage>& context) const {
  const auto ctx = read_context(context);
  if (!ctx) return std::string(kInvalidActionSentinel);
  return normalize_action(run_plan(naive_plan(ctx->task), *ctx), max_chars_);
}

std::vector<PlanOp> MemoryFollower::plan(const std::vector<ChatMessage>& context) const {
  const auto ctx = read_context(context);
  if (!ctx) return {};
  if (context.front().role == Role::system) {
    const auto memory = parse_memory_block(context.front().content, fmt_);
    for (const auto& turns : memory.successful) {
      for (const auto& t : turns) {
        if (t.role != Role::user) continue;
        const auto desc = extract_task_description(t.content);
        const auto parsed = desc ? parse_task_description(*desc) : std::nullopt;
        if (parsed && parsed->task_type == ctx->task.task_type) {
          return compile_plan(turns, ctx->task.object, ctx->task.receptacle);
        }
        break;
      }
    }
  }
  return naive_plan(ctx->task);
}

std::string MemoryFollower::decide_action(const std::vector<ChatMessage>& context) const {
  const auto ctx = read_context(context);
  if (!ctx) return std::string(kInvalidActionSentinel);
  return normalize_action(run_plan(plan(context), *ctx), max_chars_);
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::remote_chat:
      return "remote_chat";
    case PolicyKind::memory_follower:
      return "memory_follower";
    case PolicyKind::naive_placer:
      return "naive_placer";
  }
  return "naive_placer";
}

PolicyKind policy_kind_from_string(std::string_view text) {
  if (text == "remote_chat" || text == "remote") return PolicyKind::remote_chat;
  if (text == "memory_follower") return PolicyKind::memory_follower;
  if (text == "naive_placer") return PolicyKind::naive_placer;
  throw ConfigError("unknown policy kind '" + std::string(text) + "'");
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config) {
  switch (config.kind) {
    case PolicyKind::remote_chat:
      return std::make_unique<RemoteChatPolicy>(config.endpoint, config.max_action_chars);
    case PolicyKind::memory_follower:
      return std::make_unique<MemoryFollower>(config.memory_fmt, config.max_action_chars);
    case PolicyKind::naive_placer:
      return std::make_unique<NaivePlacer>(config.max_action_chars);
  }
  throw ConfigError("unknown policy kind");
}

}  // namespace exprag
