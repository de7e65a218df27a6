#include <fstream>
#include <sstream>

#include "exprag/error.hpp"
#include "exprag/experiment.hpp"
#include "text_util.hpp"

namespace exprag {

namespace {

using text::trim;

struct Value {
  bool is_list = false;
  std::vector<std::string> items;

  const std::string& scalar(const std::string& key) const {
    if (is_list || items.size() != 1) throw ConfigError("'" + key + "' expects a single value");
    return items.front();
  }
};

std::string unquote(std::string_view s, const std::string& where) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return std::string(s.substr(1, s.size() - 2));
  if (s.find('"') != std::string_view::npos) throw ConfigError(where + ": unbalanced quote");
  return std::string(s);
}

// Strips a trailing comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    else if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Value parse_value(std::string_view raw, const std::string& where) {
  raw = trim(raw);
  Value v;
  if (raw.empty()) throw ConfigError(where + ": missing value");
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError(where + ": unterminated list");
    v.is_list = true;
    std::string_view body = trim(raw.substr(1, raw.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = trim(body.substr(0, comma));
      if (item.empty()) throw ConfigError(where + ": empty list item");
      v.items.push_back(unquote(item, where));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
      if (body.empty()) break;  // trailing comma
    }
    return v;
  }
  v.items.push_back(unquote(raw, where));
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + s + "'");
  return v;
}

}  // namespace

SweepSpec parse_sweep_config(std::string_view text, const std::filesystem::path& base_dir) {
  SweepSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(body.substr(0, eq)));
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    const Value v = parse_value(body.substr(eq + 1), where);

    if (key == "ks") {
      spec.ks.clear();
      for (const auto& s : v.items) spec.ks.push_back(to_u64(s, key));
    } else if (key == "modes") {
      spec.modes.clear();
      for (const auto& s : v.items) {
        const auto m = retrieval_mode_from_string(s);
        if (m == RetrievalMode::none) throw ConfigError(where + ": use ks = [0] for the no-retrieval baseline");
        spec.modes.push_back(m);
      }
    } else if (key == "compositions") {
      spec.compositions.clear();
      for (const auto& s : v.items) spec.compositions.push_back(composition_from_string(s));
    } else if (key == "seeds") {
      spec.seeds.clear();
      for (const auto& s : v.items) spec.seeds.push_back(to_u64(s, key));
    } else if (key == "eval_split") {
      spec.eval_split = eval_split_from_string(v.scalar(key));
    } else if (key == "episodes_per_split") {
      spec.episodes_per_split = to_u64(v.scalar(key), key);
    } else if (key == "policy") {
      spec.policy = policy_kind_from_string(v.scalar(key));
    } else if (key == "env") {
      spec.env = v.scalar(key);
      if (spec.env != "mini" && spec.env != "external") throw ConfigError(where + ": env must be mini or external");
    } else if (key == "env_command") {
      spec.env_command = v.items;
    } else if (key == "train_store") {
      spec.train_store = resolve(v.scalar(key));
    } else if (key == "train_seed") {
      spec.train_seed = to_u64(v.scalar(key), key);
    } else if (key == "fmt") {
      spec.fmt = format_from_string(v.scalar(key));
    } else if (key == "max_steps") {
      spec.max_steps = static_cast<int>(to_u64(v.scalar(key), key));
    } else if (key == "tie_policy") {
      spec.tie_policy = tie_policy_from_string(v.scalar(key));
    } else if (key == "tie_seed") {
      spec.tie_seed = to_u64(v.scalar(key), key);
    } else if (key == "workers") {
      spec.workers = to_u64(v.scalar(key), key);
    } else if (key == "embedder") {
      spec.embedder = v.scalar(key);
    } else if (key == "prompts_dir") {
      spec.prompts_dir = resolve(v.scalar(key));
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  if (spec.ks.empty()) throw ConfigError("ks must not be empty");
  if (spec.modes.empty()) throw ConfigError("modes must not be empty");
  if (spec.compositions.empty()) throw ConfigError("compositions must not be empty");
  if (spec.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (spec.env == "external" && spec.env_command.empty()) throw ConfigError("env = external needs env_command");
  return spec;
}

SweepSpec load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_sweep_config(buf.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace exprag
