#include "exprag/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "exprag/error.hpp"

namespace exprag {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string mean_std(const ResultCell& c) { return fixed2(c.mean_success) + " ± " + fixed2(c.std_success); }

std::vector<Split> splits_for(EvalSplit s) {
  switch (s) {
    case EvalSplit::easy:
      return {Split::easy};
    case EvalSplit::hard:
      return {Split::hard};
    case EvalSplit::all:
      return {Split::easy, Split::hard};
  }
  return {};
}

// The composition whose index a cell actually queries.
Composition effective(Composition c) { return c == Composition::mismatched ? Composition::easy : c; }

IndexFilter filter_for(Composition c) {
  IndexFilter f;
  if (c == Composition::easy) f.splits = {Split::easy};
  if (c == Composition::hard) f.splits = {Split::hard};
  return f;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

std::string_view to_string(Composition c) {
  switch (c) {
    case Composition::all:
      return "all";
    case Composition::easy:
      return "easy";
    case Composition::hard:
      return "hard";
    case Composition::empty:
      return "empty";
    case Composition::mismatched:
      return "mismatched";
  }
  return "all";
}

Composition composition_from_string(std::string_view text) {
  for (auto c : {Composition::all, Composition::easy, Composition::hard, Composition::empty, Composition::mismatched}) {
    if (text == to_string(c)) return c;
  }
  throw ConfigError("unknown index composition '" + std::string(text) + "'");
}

std::string_view to_string(EvalSplit s) {
  return s == EvalSplit::easy ? "easy" : s == EvalSplit::hard ? "hard" : "all";
}

EvalSplit eval_split_from_string(std::string_view text) {
  if (text == "easy") return EvalSplit::easy;
  if (text == "hard") return EvalSplit::hard;
  if (text == "all") return EvalSplit::all;
  throw ConfigError("unknown eval split '" + std::string(text) + "'");
}

ReportStyle report_style_from_string(std::string_view text) {
  if (text == "csv") return ReportStyle::csv;
  if (text == "md" || text == "markdown") return ReportStyle::markdown;
  throw ConfigError("unknown report format '" + std::string(text) + "'");
}

std::vector<TaskSpec> eval_specs(Split split, std::size_t count, std::uint64_t seed) {
  // Easy and hard lists of one seed come from different streams.
  const std::uint64_t stream = split == Split::hard ? 0x9e3779b97f4a7c15ULL : 0;
  return sample_task_specs(split, count, seed ^ stream);
}

ResultCell aggregate_cell(const std::vector<std::vector<const EpisodeResult*>>& per_seed) {
  ResultCell cell;
  std::vector<double> rates;
  std::size_t steps = 0;
  std::size_t calls = 0;
  double chars = 0.0;
  for (const auto& group : per_seed) {
    if (group.empty()) continue;
    std::size_t wins = 0;
    for (const EpisodeResult* r : group) {
      wins += r->success ? 1 : 0;
      steps += static_cast<std::size_t>(r->steps);
      for (std::size_t c : r->prompt_chars_per_step) chars += static_cast<double>(c);
      calls += r->prompt_chars_per_step.size();
    }
    cell.episodes += group.size();
    rates.push_back(100.0 * static_cast<double>(wins) / static_cast<double>(group.size()));
  }
  cell.n_seeds = rates.size();
  if (rates.empty()) return cell;
  double sum = 0.0;
  for (double r : rates) sum += r;
  cell.mean_success = sum / static_cast<double>(rates.size());
  double var = 0.0;
  for (double r : rates) var += (r - cell.mean_success) * (r - cell.mean_success);
  cell.std_success = std::sqrt(var / static_cast<double>(rates.size()));
  cell.mean_steps = static_cast<double>(steps) / static_cast<double>(cell.episodes);
  cell.mean_prompt_chars = calls == 0 ? 0.0 : chars / static_cast<double>(calls);
  return cell;
}

SweepResult run_sweep(const SweepSpec& spec) {
  SweepResult out;
  const bool mini = spec.env == "mini";
  const std::string template_name = mini ? std::string(kMiniWorldName) : "alfworld";
  const PromptTemplate prompt =
      spec.prompts_dir ? load_template(*spec.prompts_dir, template_name) : builtin_template(template_name);

  std::vector<Trajectory> store;
  if (spec.train_store) {
    store = read_store(*spec.train_store);
  } else {
    auto specs = enumerate_task_specs(Split::easy, spec.train_seed);
    const auto hard = enumerate_task_specs(Split::hard, spec.train_seed ^ 0x9e3779b97f4a7c15ULL);
    specs.insert(specs.end(), hard.begin(), hard.end());
    auto collected = collect_mini_trajectories(specs, spec.workers);
    store = std::move(collected.trajectories);
    out.failed_collections = collected.failures.size();
  }
  const TrajectoryLookup lookup(store);
  const auto embedder = make_embedder(spec.embedder);

  std::map<std::pair<Composition, KeyMode>, ExperienceIndex> indices;
  auto index_for = [&](Composition c, KeyMode key_mode) -> const ExperienceIndex& {
    const auto key = std::pair{effective(c), key_mode};
    auto it = indices.find(key);
    if (it == indices.end()) {
      const std::vector<Trajectory> none;
      const auto& source = key.first == Composition::empty ? none : store;
      const std::string path = spec.train_store ? spec.train_store->string() : "<generated>";
      it = indices.emplace(key, build_index(source, filter_for(key.first), key_mode, *embedder, path)).first;
    }
    return it->second;
  };

  const auto eval = splits_for(spec.eval_split);
  std::map<std::pair<Split, std::uint64_t>, std::vector<TaskSpec>> spec_lists;
  for (Split s : eval) {
    for (auto seed : spec.seeds) spec_lists[{s, seed}] = eval_specs(s, spec.episodes_per_split, seed);
  }

  PolicyConfig pcfg;
  pcfg.kind = spec.policy;
  pcfg.memory_fmt = spec.fmt;
  if (spec.policy == PolicyKind::remote_chat) pcfg.endpoint = EndpointConfig::from_env("EXPRAG_LLM");
  const auto policy = make_policy(pcfg);

  EnvFactory make_env;
  if (mini) {
    make_env = [] { return std::make_unique<MiniWorld>(); };
  } else {
    make_env = [&spec]() -> std::unique_ptr<Environment> {
      return connect_external(LaunchSpec{spec.env_command, "external", std::chrono::milliseconds(10000)});
    };
  }

  // results[(split, seed)] for one cell.
  using CellRuns = std::map<std::pair<Split, std::uint64_t>, std::vector<EpisodeResult>>;
  std::optional<CellRuns> baseline;
  auto run_cell = [&](RetrievalMode mode, std::size_t k, Composition comp) {
    EpisodeConfig cfg;
    cfg.fmt = spec.fmt;
    cfg.max_steps = spec.max_steps;
    cfg.prompt = prompt;
    cfg.k = k;
    if (k > 0) {
      cfg.retrieval_mode = mode;
      const KeyMode key_mode =
          mode == RetrievalMode::dynamic_query ? KeyMode::full_trajectory_json : KeyMode::task_description;
      cfg.retrieval = RetrievalContext{&index_for(comp, key_mode), embedder.get(), &lookup,
                                       RetrievalOptions{spec.tie_policy, spec.tie_seed, {}}};
    }
    CellRuns runs;
    for (const auto& [key, specs] : spec_lists) {
      runs[key] = run_episodes(make_env, *policy, specs, cfg, spec.workers);
    }
    return runs;
  };

  out.table.splits.clear();
  for (Split s : eval) out.table.splits.emplace_back(to_string(s));
  if (eval.size() > 1) out.table.splits.emplace_back("all");

  for (auto mode : spec.modes) {
    for (auto k : spec.ks) {
      for (auto comp : spec.compositions) {
        CellRuns runs;
        if (k == 0) {
          if (!baseline) baseline = run_cell(RetrievalMode::none, 0, comp);
          runs = *baseline;
        } else {
          runs = run_cell(mode, k, comp);
        }
        ResultRow row{mode, k, comp, {}};
        for (Split s : eval) {
          std::vector<std::vector<const EpisodeResult*>> per_seed;
          for (auto seed : spec.seeds) {
            auto& group = per_seed.emplace_back();
            for (const auto& r : runs.at({s, seed})) group.push_back(&r);
          }
          row.by_split[std::string(to_string(s))] = aggregate_cell(per_seed);
        }
        if (eval.size() > 1) {
          std::vector<std::vector<const EpisodeResult*>> per_seed;
          for (auto seed : spec.seeds) {
            auto& group = per_seed.emplace_back();
            for (Split s : eval) {
              for (const auto& r : runs.at({s, seed})) group.push_back(&r);
            }
          }
          row.by_split["all"] = aggregate_cell(per_seed);
        }
        out.table.rows.push_back(std::move(row));

        const RetrievalMode logged = k == 0 ? RetrievalMode::none : mode;
        for (auto seed : spec.seeds) {
          for (Split s : eval) {
            for (auto& r : runs.at({s, seed})) out.episodes.push_back(SweepEpisode{logged, k, comp, seed, std::move(r)});
          }
        }
      }
    }
  }
  return out;
}

std::string report(const ResultTable& table, ReportStyle style) {
  std::string out;
  if (style == ReportStyle::csv) {
    out += "mode,k,composition";
    for (const auto& s : table.splits) out += "," + s;
    for (const auto& s : table.splits) out += "," + s + "_steps";
    for (const auto& s : table.splits) out += "," + s + "_prompt_chars";
    out += "\n";
    for (const auto& row : table.rows) {
      out += std::string(to_string(row.mode)) + "," + std::to_string(row.k) + "," + std::string(to_string(row.composition));
      for (const auto& s : table.splits) out += "," + mean_std(row.by_split.at(s));
      for (const auto& s : table.splits) out += "," + fixed2(row.by_split.at(s).mean_steps);
      for (const auto& s : table.splits) out += "," + fixed2(row.by_split.at(s).mean_prompt_chars);
      out += "\n";
    }
    return out;
  }
  out += "| mode | k | composition |";
  for (const auto& s : table.splits) out += " " + s + " |";
  out += "\n|---|---|---|";
  for (std::size_t i = 0; i < table.splits.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& row : table.rows) {
    out += "| " + std::string(to_string(row.mode)) + " | " + std::to_string(row.k) + " | " +
           std::string(to_string(row.composition)) + " |";
    for (const auto& s : table.splits) out += " " + mean_std(row.by_split.at(s)) + " |";
    out += "\n";
  }
  return out;
}

std::string table_to_json(const ResultTable& table) {
  ordered_json j;
  j["splits"] = table.splits;
  ordered_json rows = ordered_json::array();
  for (const auto& row : table.rows) {
    ordered_json r;
    r["mode"] = std::string(to_string(row.mode));
    r["k"] = row.k;
    r["composition"] = std::string(to_string(row.composition));
    ordered_json cells;
    for (const auto& s : table.splits) {
      const auto& c = row.by_split.at(s);
      cells[s] = ordered_json{{"mean_success", c.mean_success},     {"std_success", c.std_success},
                              {"n_seeds", c.n_seeds},               {"episodes", c.episodes},
                              {"mean_steps", c.mean_steps},         {"mean_prompt_chars", c.mean_prompt_chars}};
    }
    r["cells"] = std::move(cells);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

ResultTable table_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ResultTable t;
    t.splits = j.at("splits").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      ResultRow row;
      row.mode = retrieval_mode_from_string(r.at("mode").get<std::string>());
      row.k = r.at("k").get<std::size_t>();
      row.composition = composition_from_string(r.at("composition").get<std::string>());
      for (const auto& s : t.splits) {
        const auto& c = r.at("cells").at(s);
        row.by_split[s] = ResultCell{c.at("mean_success").get<double>(), c.at("std_success").get<double>(),
                                     c.at("n_seeds").get<std::size_t>(),  c.at("episodes").get<std::size_t>(),
                                     c.at("mean_steps").get<double>(),    c.at("mean_prompt_chars").get<double>()};
      }
      t.rows.push_back(std::move(row));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("<table>", e.what());
  }
}

void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "table.csv", report(result.table, ReportStyle::csv));
  write_file(dir / "table.md", report(result.table, ReportStyle::markdown));
  write_file(dir / "table.json", table_to_json(result.table));
  std::string lines;
  for (const auto& e : result.episodes) {
    ordered_json j;
    j["mode"] = std::string(to_string(e.mode));
    j["k"] = e.k;
    j["composition"] = std::string(to_string(e.composition));
    j["seed"] = e.seed;
    const auto log = episode_log_json(e.result);
    for (const auto& [key, value] : log.items()) j[key] = value;
    lines += j.dump() + "\n";
  }
  write_file(dir / "episodes.jsonl", lines);
}

}  // namespace exprag
