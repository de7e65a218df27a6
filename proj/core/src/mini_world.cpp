#include <algorithm>
#include <array>
#include <cctype>
#include <random>
#include <tuple>

#include "exprag/environment.hpp"
#include "exprag/error.hpp"
#include "text_util.hpp"

namespace exprag {

namespace {

using text::trim;

const std::vector<std::string>& all_receptacles() {
  static const std::vector<std::string> v{"countertop 1", "drawer 1",    "drawer 2", "fridge 1",
                                          "garbagecan 1", "microwave 1", "shelf 1",  "sinkbasin 1"};
  return v;
}

const std::vector<std::string>& targets() {
  static const std::vector<std::string> v{"countertop 1", "drawer 1", "drawer 2", "garbagecan 1", "shelf 1"};
  return v;
}

const std::vector<std::string>& place_objects() {
  static const std::vector<std::string> v{"apple", "candle", "cup", "egg", "mug", "potato"};
  return v;
}

const std::vector<std::string>& appliance_objects() {
  static const std::vector<std::string> v{"apple", "cup", "egg", "mug", "potato"};
  return v;
}

const std::vector<std::string>& distractor_pool() {
  static const std::vector<std::string> v{"apple", "book", "bowl",  "candle", "cup",
                                          "egg",   "mug",  "plate", "potato", "spoon"};
  return v;
}
constexpr std::size_t kDistractors = 3;

constexpr std::string_view kMicrowave = "microwave 1";
constexpr std::string_view kFridge = "fridge 1";
constexpr std::string_view kSinkbasin = "sinkbasin 1";

bool is_receptacle(std::string_view name) {
  return std::find(all_receptacles().begin(), all_receptacles().end(), name) != all_receptacles().end();
}

bool contains(const std::vector<std::string>& items, std::string_view item) {
  return std::find(items.begin(), items.end(), item) != items.end();
}

std::string list_objects(const std::vector<std::string>& objects) {
  if (objects.empty()) return "nothing";
  std::string out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i > 0) out += objects.size() > 1 && i + 1 == objects.size() ? ", and " : ", ";
    out += "a " + objects[i];
  }
  return out;
}

}  // namespace

const std::vector<std::string>& MiniWorld::receptacles() { return all_receptacles(); }

const std::vector<std::string>& MiniWorld::target_receptacles() { return targets(); }

const std::vector<std::string>& MiniWorld::objects_for(std::string_view task_type) {
  if (task_type == task_types::kPickHeatThenPlace || task_type == task_types::kPickCoolThenPlace) {
    return appliance_objects();
  }
  return place_objects();
}

bool MiniWorld::openable(std::string_view receptacle) {
  return receptacle == "drawer 1" || receptacle == "drawer 2" || receptacle == kFridge ||
         receptacle == kMicrowave;
}

std::vector<std::string_view> mini_task_types(Split split) {
  if (split == Split::easy) return {task_types::kPickAndPlace};
  return {task_types::kPickHeatThenPlace, task_types::kPickCoolThenPlace, task_types::kPickTwoAndPlace};
}

TaskSpec make_task_spec(std::string_view task_type, std::string object, std::string receptacle,
                        std::int64_t seed) {
  const bool known = task_type == task_types::kPickAndPlace || task_type == task_types::kPickHeatThenPlace ||
                     task_type == task_types::kPickCoolThenPlace || task_type == task_types::kPickTwoAndPlace;
  if (!known) throw ValidationError("unknown mini-world task type '" + std::string(task_type) + "'");
  const auto& catalog = MiniWorld::objects_for(task_type);
  const auto obj_it = std::find(catalog.begin(), catalog.end(), object);
  if (obj_it == catalog.end()) {
    throw ValidationError("object '" + object + "' is not available for " + std::string(task_type));
  }
  const auto tgt_it = std::find(targets().begin(), targets().end(), receptacle);
  if (tgt_it == targets().end()) throw ValidationError("'" + receptacle + "' is not a placement target");

  TaskSpec spec;
  spec.task_type = std::string(task_type);
  spec.split = *split_for_task_type(task_type);
  spec.seed = seed;
  spec.variation_id = (obj_it - catalog.begin()) * static_cast<std::int64_t>(targets().size()) +
                      (tgt_it - targets().begin());
  if (task_type == task_types::kPickTwoAndPlace) spec.second_object = object;
  spec.object = std::move(object);
  spec.receptacle = std::move(receptacle);
  return spec;
}

std::string describe_task(const TaskSpec& spec) {
  if (spec.task_type == task_types::kPickHeatThenPlace) {
    return "heat some " + spec.object + " and put it in " + spec.receptacle + ".";
  }
  if (spec.task_type == task_types::kPickCoolThenPlace) {
    return "cool some " + spec.object + " and put it in " + spec.receptacle + ".";
  }
  if (spec.task_type == task_types::kPickTwoAndPlace) {
    return "find two " + spec.object + " and put them in " + spec.receptacle + ".";
  }
  return "put a " + spec.object + " in " + spec.receptacle + ".";
}

std::optional<ParsedTask> parse_task_description(std::string_view description) {
  std::string_view d = trim(description);
  if (d.ends_with('.')) d.remove_suffix(1);
  const auto words = text::split_words(d);
  if (words.size() < 5) return std::nullopt;

  auto receptacle_from = [&](std::size_t first) -> std::optional<std::string> {
    if (first >= words.size()) return std::nullopt;
    std::string r;
    for (std::size_t i = first; i < words.size(); ++i) {
      if (!r.empty()) r += ' ';
      r += words[i];
    }
    if (!std::isdigit(static_cast<unsigned char>(r.back()))) r += " 1";
    return r;
  };
  auto prep = [](std::string_view w) { return w == "in" || w == "on"; };

  // heat some X and put it in Y / cool some X and put it in Y
  if ((words[0] == "heat" || words[0] == "cool") && words[1] == "some" && words.size() >= 8 &&
      words[3] == "and" && words[4] == "put" && words[5] == "it" && prep(words[6])) {
    if (auto r = receptacle_from(7)) {
      return ParsedTask{std::string(words[0] == "heat" ? task_types::kPickHeatThenPlace
                                                       : task_types::kPickCoolThenPlace),
                        std::string(words[2]), *r};
    }
  }
  // find two X and put them in Y
  if (words[0] == "find" && words[1] == "two" && words.size() >= 8 && words[3] == "and" &&
      words[4] == "put" && words[5] == "them" && prep(words[6])) {
    if (auto r = receptacle_from(7)) {
      return ParsedTask{std::string(task_types::kPickTwoAndPlace), std::string(words[2]), *r};
    }
  }
  if (words[0] == "put") {
    // put two X in Y
    if (words[1] == "two" && prep(words[3])) {
      if (auto r = receptacle_from(4)) return ParsedTask{std::string(task_types::kPickTwoAndPlace), std::string(words[2]), *r};
    }
    // put a hot X in Y / put a cool X in Y
    if ((words[1] == "a" || words[1] == "an" || words[1] == "some") && (words[2] == "hot" || words[2] == "cool") &&
        words.size() >= 6 && prep(words[4])) {
      if (auto r = receptacle_from(5)) {
        return ParsedTask{std::string(words[2] == "hot" ? task_types::kPickHeatThenPlace
                                                        : task_types::kPickCoolThenPlace),
                          std::string(words[3]), *r};
      }
    }
    // put a X in Y
    if ((words[1] == "a" || words[1] == "an" || words[1] == "some") && prep(words[3])) {
      if (auto r = receptacle_from(4)) return ParsedTask{std::string(task_types::kPickAndPlace), std::string(words[2]), *r};
    }
  }
  return std::nullopt;
}

std::optional<std::string> extract_task_description(std::string_view observation) {
  constexpr std::string_view kMarker = "Your task is to: ";
  const auto pos = observation.rfind(kMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = observation.substr(pos + kMarker.size());
  const auto nl = rest.find('\n');
  if (nl != std::string_view::npos) rest = rest.substr(0, nl);
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  return std::string(rest);
}

std::string MiniWorld::reset(const TaskSpec& spec) {
  // Validates the spec and normalizes derived fields.
  spec_ = make_task_spec(spec.task_type, spec.object, spec.receptacle, spec.seed);
  state_ = EnvState{};
  for (const auto& r : all_receptacles()) state_.contents[r] = {};
  state_.location = std::string(kStartLocation);
  has_reset_ = true;

  std::mt19937_64 rng(static_cast<std::uint64_t>(spec_.seed));
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::string> sources;
  for (const auto& r : all_receptacles()) {
    if (r != spec_.receptacle) sources.push_back(r);
  }
  for (const auto& instance : required_instances()) {
    state_.contents[sources[pick(sources.size())]].push_back(instance);
  }
  std::vector<std::string> pool;
  for (const auto& o : distractor_pool()) {
    if (o != spec_.object) pool.push_back(o);
  }
  for (std::size_t i = 0; i < kDistractors; ++i) {
    const std::size_t j = pick(pool.size());
    const std::string instance = pool[j] + " 1";
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    state_.contents[all_receptacles()[pick(all_receptacles().size())]].push_back(instance);
  }
  for (auto& [_, objs] : state_.contents) std::sort(objs.begin(), objs.end());

  std::string obs = "-= Welcome to TextWorld, ALFRED! =-\n\nYou are at " + state_.location +
                    ". Looking quickly around you, you see ";
  obs += list_objects(all_receptacles());
  obs += ". " + describe_receptacle(state_.location);
  obs += "\n\nYour task is to: " + describe_task(spec_);
  return obs;
}

std::vector<std::string> MiniWorld::required_instances() const {
  std::vector<std::string> out{spec_.object + " 1"};
  if (spec_.second_object) out.push_back(*spec_.second_object + " 2");
  return out;
}

std::string MiniWorld::describe_receptacle(const std::string& receptacle) const {
  const auto& objs = state_.contents.at(receptacle);
  if (openable(receptacle)) {
    if (!state_.open.contains(receptacle)) return "The " + receptacle + " is closed.";
    return "The " + receptacle + " is open. In it, you see " + list_objects(objs) + ".";
  }
  return "On the " + receptacle + ", you see " + list_objects(objs) + ".";
}

bool MiniWorld::goal_reached() const {
  const auto& at_target = state_.contents.at(spec_.receptacle);
  for (const auto& instance : required_instances()) {
    if (!contains(at_target, instance)) return false;
    if (spec_.task_type == task_types::kPickHeatThenPlace && !state_.heated.contains(instance)) return false;
    if (spec_.task_type == task_types::kPickCoolThenPlace && !state_.cooled.contains(instance)) return false;
  }
  return true;
}

StepResult MiniWorld::step(std::string_view action) {
  if (!has_reset_) throw ContractError("step before reset");
  if (state_.done) throw ContractError("step after the episode is done");
  ++state_.steps;
  StepResult result;
  result.observation = apply(trim(action));
  if (goal_reached()) {
    state_.done = true;
    state_.success = true;
  }
  result.done = state_.done;
  result.success = state_.success;
  result.score = state_.success ? 1.0 : 0.0;
  return result;
}

std::string MiniWorld::apply(std::string_view action) {
  const std::string nothing(kNothingHappens);
  const std::string& here = state_.location;
  auto accessible = [this](const std::string& r) { return !openable(r) || state_.open.contains(r); };
  auto visible_here = [&](std::string_view obj) {
    return accessible(here) && contains(state_.contents.at(here), obj);
  };

  if (action == "look") return "You are at " + here + ". " + describe_receptacle(here);
  if (action == "inventory") {
    if (!state_.inventory) return "You are not carrying anything.";
    return "You are carrying: a " + *state_.inventory + ".";
  }
  if (auto target = text::after_prefix(action, "go to ")) {
    const std::string r(*target);
    if (!is_receptacle(r) || r == here) return nothing;
    state_.location = r;
    return "You arrive at " + r + ". " + describe_receptacle(r);
  }
  if (auto target = text::after_prefix(action, "open ")) {
    const std::string r(*target);
    if (r != here || !openable(r) || state_.open.contains(r)) return nothing;
    state_.open.insert(r);
    return "You open the " + r + ". " + describe_receptacle(r);
  }
  if (auto target = text::after_prefix(action, "close ")) {
    const std::string r(*target);
    if (r != here || !openable(r) || !state_.open.contains(r)) return nothing;
    state_.open.erase(r);
    return "You close the " + r + ".";
  }
  if (auto rest = text::after_prefix(action, "take ")) {
    auto parts = text::split_once(*rest, " from ");
    if (!parts) return nothing;
    const std::string obj(parts->first), r(parts->second);
    if (r != here || state_.inventory || !visible_here(obj)) return nothing;
    auto& objs = state_.contents[r];
    objs.erase(std::find(objs.begin(), objs.end(), obj));
    state_.inventory = obj;
    return "You pick up the " + obj + " from the " + r + ".";
  }
  if (auto rest = text::after_prefix(action, "move ")) {
    auto parts = text::split_once(*rest, " to ");
    if (!parts) return nothing;
    const std::string obj(parts->first), r(parts->second);
    if (r != here || state_.inventory != obj || !accessible(r)) return nothing;
    auto& objs = state_.contents[r];
    objs.push_back(obj);
    std::sort(objs.begin(), objs.end());
    state_.inventory.reset();
    return "You move the " + obj + " to the " + r + ".";
  }
  for (auto [verb, appliance, flags] :
       {std::tuple{std::string_view("heat "), kMicrowave, &state_.heated},
        std::tuple{std::string_view("cool "), kFridge, &state_.cooled},
        std::tuple{std::string_view("clean "), kSinkbasin, &state_.cleaned}}) {
    if (auto rest = text::after_prefix(action, verb)) {
      auto parts = text::split_once(*rest, " with ");
      if (!parts) return nothing;
      const std::string obj(parts->first), r(parts->second);
      if (r != appliance || r != here || state_.inventory != obj) return nothing;
      flags->insert(obj);
      return "You " + std::string(trim(verb)) + " the " + obj + " using the " + r + ".";
    }
  }
  if (auto thing = text::after_prefix(action, "examine ")) {
    const std::string x(*thing);
    if (x == here) return describe_receptacle(here);
    if (state_.inventory == x || visible_here(x)) return "There's nothing special about " + x + ".";
    return nothing;
  }
  if (auto thing = text::after_prefix(action, "use ")) {
    const std::string x(*thing);
    if (state_.inventory == x || visible_here(x)) return "You use the " + x + ".";
    return nothing;
  }
  return nothing;
}

std::string MiniWorld::expert_action() const {
  const std::string& here = state_.location;
  const auto& at_target = state_.contents.at(spec_.receptacle);
  auto go_or = [&](const std::string& place, const std::string& action) {
    if (here != place) return "go to " + place;
    if (openable(place) && !state_.open.contains(place)) return "open " + place;
    return action;
  };
  for (const auto& instance : required_instances()) {
    if (contains(at_target, instance)) continue;
    if (state_.inventory == instance) {
      if (spec_.task_type == task_types::kPickHeatThenPlace && !state_.heated.contains(instance)) {
        const std::string m(kMicrowave);
        return here != m ? "go to " + m : "heat " + instance + " with " + m;
      }
      if (spec_.task_type == task_types::kPickCoolThenPlace && !state_.cooled.contains(instance)) {
        const std::string f(kFridge);
        return here != f ? "go to " + f : "cool " + instance + " with " + f;
      }
      return go_or(spec_.receptacle, "move " + instance + " to " + spec_.receptacle);
    }
    for (const auto& [r, objs] : state_.contents) {
      if (contains(objs, instance)) return go_or(r, "take " + instance + " from " + r);
    }
  }
  return "look";
}

int default_max_steps(std::string_view env_name, std::string_view task_type) {
  if (env_name == "scienceworld") {
    static const std::array<std::pair<std::string_view, int>, 9> kBudgets{{
        {"mendelian-genetics-known-plant", 150},
        {"mendelian-genetics-unknown-plant", 150},
        {"boil", 120},
        {"freeze", 90},
        {"grow-fruit", 80},
        {"change-the-state-of-matter-of", 70},
        {"inclined-plane-determine-angle", 70},
        {"inclined-plane-friction-unnamed-surfaces", 70},
        {"melt", 70},
    }};
    for (const auto& [name, budget] : kBudgets) {
      if (name == task_type) return budget;
    }
  }
  return kDefaultMaxSteps;
}

std::vector<TaskSpec> enumerate_task_specs(Split split, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TaskSpec> out;
  for (auto type : mini_task_types(split)) {
    for (const auto& obj : MiniWorld::objects_for(type)) {
      for (const auto& target : targets()) {
        out.push_back(make_task_spec(type, obj, target, static_cast<std::int64_t>(rng() >> 1)));
      }
    }
  }
  return out;
}

std::vector<TaskSpec> sample_task_specs(Split split, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto types = mini_task_types(split);
  std::vector<TaskSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto type = types[rng() % types.size()];
    const auto& objs = MiniWorld::objects_for(type);
    const auto& obj = objs[rng() % objs.size()];
    const auto& target = targets()[rng() % targets().size()];
    out.push_back(make_task_spec(type, obj, target, static_cast<std::int64_t>(rng() >> 1)));
  }
  return out;
}

}  // namespace exprag
