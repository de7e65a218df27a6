#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "exprag/embedder.hpp"
#include "exprag/environment.hpp"
#include "exprag/error.hpp"
#include "exprag/experience_index.hpp"
#include "exprag/experiment.hpp"
#include "exprag/policy.hpp"
#include "exprag/rollout.hpp"
#include "exprag/sft_export.hpp"

namespace exprag::cli {

namespace {

const std::vector<std::string> kFormats{"chat_json", "agentic_json", "compact_json", "textual"};
const std::vector<std::string> kTiePolicies{"lexicographic", "seeded_shuffle"};

struct CollectArgs {
  std::string split = "all";
  std::size_t count = 0;
  std::uint64_t seed = 2025;
  std::string out;
};

struct IndexArgs {
  std::string store;
  std::string split = "all";
  std::string outcomes = "all";
  std::string key_mode = "task";
  std::string embedder = "local_hash:256";
  std::vector<std::string> exclude;
  std::string out;
};

struct RetrieveArgs {
  std::string index;
  std::string query;
  std::size_t k = 2;
  std::string tie_policy = "lexicographic";
  std::uint64_t tie_seed = 0;
};

struct RolloutArgs {
  std::string task_type;
  std::string object;
  std::string receptacle;
  std::int64_t seed = 0;
  std::string split;
  std::size_t count = 0;
  std::string policy = "naive_placer";
  std::string mode = "none";
  std::size_t k = 0;
  std::string index;
  std::string store;
  std::string fmt = "chat_json";
  int max_steps = 0;
  std::string tie_policy = "lexicographic";
  std::uint64_t tie_seed = 0;
  std::string env = "mini";
  std::vector<std::string> env_command;
  std::string prompts_dir;
  std::string out;
};

struct SweepArgs {
  std::string config;
  std::string out;
};

struct ExportArgs {
  std::string store;
  std::string mode = "plain";
  std::string index;
  std::string retrieval_store;
  std::size_t k = 2;
  std::string fmt = "chat_json";
  std::string query = "static";
  std::string tie_policy = "lexicographic";
  std::uint64_t tie_seed = 0;
  bool no_leave_one_out = false;
  std::string prompts_dir;
  std::string out;
};

struct ReportArgs {
  std::string table;
  std::string format = "csv";
};

std::set<Split> splits_from(const std::string& s) {
  if (s == "easy") return {Split::easy};
  if (s == "hard") return {Split::hard};
  return {};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f << content;
  if (!f) throw Error("write failed for " + path);
}

int run_collect(const CollectArgs& a, std::size_t workers, std::ostream& err) {
  std::vector<TaskSpec> specs;
  std::vector<Split> splits;
  if (a.split != "hard") splits.push_back(Split::easy);
  if (a.split != "easy") splits.push_back(Split::hard);
  for (Split s : splits) {
    const std::uint64_t seed = s == Split::hard ? a.seed ^ 0x9e3779b97f4a7c15ULL : a.seed;
    auto part = a.count == 0 ? enumerate_task_specs(s, seed) : sample_task_specs(s, a.count, seed);
    specs.insert(specs.end(), part.begin(), part.end());
  }
  const auto result = collect_mini_trajectories(specs, workers);
  write_store(a.out, result.trajectories);
  for (const auto& f : result.failures) {
    err << "collect: " << describe_task(f.spec) << " (seed " << f.spec.seed << "): " << f.reason << "\n";
  }
  err << "collect: wrote " << result.trajectories.size() << " trajectories to " << a.out << "\n";
  return result.failures.empty() ? kOk : kFailure;
}

int run_index_build(const IndexArgs& a, std::ostream& err) {
  IndexFilter filter;
  filter.splits = splits_from(a.split);
  if (a.outcomes == "success") filter.outcomes = {OutcomeClass::success};
  if (a.outcomes == "failure") filter.outcomes = {OutcomeClass::failure};
  filter.exclude_ids.insert(a.exclude.begin(), a.exclude.end());
  const auto embedder = make_embedder(a.embedder);
  const auto index = build_index(std::filesystem::path(a.store), filter, key_mode_from_string(a.key_mode), *embedder);
  save_index(index, a.out);
  err << "index: " << index.size() << " entries, dim " << index.dim() << " -> " << a.out << "\n";
  return kOk;
}

int run_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const auto index = load_index(a.index);
  const auto embedder = make_embedder(index.manifest().embedder_id);
  RetrievalOptions opts{tie_policy_from_string(a.tie_policy), a.tie_seed, {}};
  for (const auto& hit : retrieve_top_k(index, a.query, a.k, *embedder, opts)) {
    char score[32];
    std::snprintf(score, sizeof(score), "%.9f", hit.score);
    out << hit.traj_id << '\t' << score << '\n';
  }
  return kOk;
}

int run_rollout(const RolloutArgs& a, std::size_t workers, std::ostream& out, std::ostream& err) {
  std::vector<TaskSpec> specs;
  if (!a.task_type.empty()) {
    if (a.object.empty() || a.receptacle.empty()) throw ConfigError("--task-type needs --object and --receptacle");
    specs.push_back(make_task_spec(a.task_type, a.object, a.receptacle, a.seed));
  } else if (!a.split.empty()) {
    specs = sample_task_specs(split_from_string(a.split), a.count == 0 ? 1 : a.count,
                              static_cast<std::uint64_t>(a.seed));
  } else {
    throw ConfigError("rollout needs --task-type or --split");
  }

  PolicyConfig pcfg;
  pcfg.kind = policy_kind_from_string(a.policy);
  pcfg.memory_fmt = format_from_string(a.fmt);
  if (pcfg.kind == PolicyKind::remote_chat) pcfg.endpoint = EndpointConfig::from_env("EXPRAG_LLM");
  const auto policy = make_policy(pcfg);

  EpisodeConfig cfg;
  cfg.fmt = pcfg.memory_fmt;
  cfg.max_steps = a.max_steps;
  const std::string template_name = a.env == "mini" ? "mini" : "alfworld";
  cfg.prompt = a.prompts_dir.empty() ? builtin_template(template_name) : load_template(a.prompts_dir, template_name);
  cfg.retrieval_mode = retrieval_mode_from_string(a.mode);
  cfg.k = a.k;

  std::optional<ExperienceIndex> index;
  std::unique_ptr<Embedder> embedder;
  std::vector<Trajectory> store;
  TrajectoryLookup lookup;
  if (cfg.retrieval_mode != RetrievalMode::none) {
    if (a.index.empty() || a.store.empty()) throw ConfigError("retrieval needs --index and --store");
    index = load_index(a.index);
    embedder = make_embedder(index->manifest().embedder_id);
    store = read_store(a.store);
    lookup = TrajectoryLookup(store);
    cfg.retrieval = RetrievalContext{&*index, embedder.get(), &lookup,
                                     RetrievalOptions{tie_policy_from_string(a.tie_policy), a.tie_seed, {}}};
  }

  EnvFactory make_env;
  if (a.env == "mini") {
    make_env = [] { return std::make_unique<MiniWorld>(); };
  } else {
    make_env = [&a]() -> std::unique_ptr<Environment> {
      return connect_external(LaunchSpec{a.env_command, "external", std::chrono::milliseconds(10000)});
    };
  }
  const auto results = run_episodes(make_env, *policy, specs, cfg, workers);
  std::string lines;
  std::size_t wins = 0;
  bool errors = false;
  for (const auto& r : results) {
    lines += episode_log_line(r) + "\n";
    wins += r.success ? 1 : 0;
    errors = errors || !r.errors.empty();
  }
  emit(a.out, lines, out);
  err << "rollout: " << wins << "/" << results.size() << " episodes succeeded\n";
  return errors ? kFailure : kOk;
}

int run_sweep_cmd(const SweepArgs& a, std::size_t workers, bool workers_set, std::ostream& err) {
  auto spec = load_sweep_config(a.config);
  if (workers_set) spec.workers = workers;
  const auto result = run_sweep(spec);
  write_sweep_outputs(result, a.out);
  std::size_t failed_episodes = 0;
  for (const auto& e : result.episodes) failed_episodes += e.result.errors.empty() ? 0 : 1;
  err << "sweep: " << result.table.rows.size() << " rows, " << result.episodes.size() << " episodes -> " << a.out
      << "\n";
  return failed_episodes == 0 && result.failed_collections == 0 ? kOk : kFailure;
}

int run_export(const ExportArgs& a, std::size_t workers, std::ostream& err) {
  const auto store = read_store(a.store);
  SftOptions opts;
  opts.mode = sft_mode_from_string(a.mode);
  opts.k = a.k;
  opts.fmt = format_from_string(a.fmt);
  opts.query = retrieval_mode_from_string(a.query);
  opts.tie_policy = tie_policy_from_string(a.tie_policy);
  opts.tie_seed = a.tie_seed;
  opts.leave_one_out = !a.no_leave_one_out;
  if (!a.prompts_dir.empty()) opts.prompts_dir = a.prompts_dir;
  opts.workers = workers;

  std::optional<ExperienceIndex> index;
  std::unique_ptr<Embedder> embedder;
  std::vector<Trajectory> retrieval_store;
  if (opts.mode == SftMode::exprag) {
    if (a.index.empty()) throw ConfigError("exprag export needs --index");
    index = load_index(a.index);
    embedder = make_embedder(index->manifest().embedder_id);
    if (!a.retrieval_store.empty()) retrieval_store = read_store(a.retrieval_store);
  }
  const auto* rstore = a.retrieval_store.empty() ? nullptr : &retrieval_store;
  const auto count = export_sft(store, opts, a.out, index ? &*index : nullptr, embedder.get(), rstore);
  err << "export-sft: wrote " << count << " samples to " << a.out << "\n";
  return kOk;
}

int run_report(const ReportArgs& a, std::ostream& out) {
  const auto table = table_from_json(read_file(a.table));
  out << report(table, report_style_from_string(a.format));
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Experience retrieval for text-environment agents", "exprag"};
  app.require_subcommand(1);
  std::size_t workers = 1;
  auto* workers_opt = app.add_option("--workers", workers, "Concurrent episodes")->check(CLI::PositiveNumber);

  CollectArgs collect;
  auto* c = app.add_subcommand("collect", "Record expert trajectories into a store");
  c->add_option("--split", collect.split)->check(CLI::IsMember({"easy", "hard", "all"}));
  c->add_option("--count", collect.count, "Sampled specs per split (0: every combination)");
  c->add_option("--seed", collect.seed);
  c->add_option("--out", collect.out)->required();

  IndexArgs idx;
  auto* index_cmd = app.add_subcommand("index", "Experience index operations");
  index_cmd->require_subcommand(1);
  auto* build = index_cmd->add_subcommand("build", "Embed a store into an index file");
  build->add_option("--store", idx.store)->required();
  build->add_option("--split", idx.split)->check(CLI::IsMember({"easy", "hard", "all"}));
  build->add_option("--outcomes", idx.outcomes)->check(CLI::IsMember({"all", "success", "failure"}));
  build->add_option("--key-mode", idx.key_mode)->check(CLI::IsMember({"task", "full"}));
  build->add_option("--embedder", idx.embedder);
  build->add_option("--exclude", idx.exclude, "Trajectory ids to leave out");
  build->add_option("--out", idx.out)->required();

  RetrieveArgs ret;
  auto* r = app.add_subcommand("retrieve", "Print the top-k trajectory ids for a query");
  r->add_option("--index", ret.index)->required();
  r->add_option("--query", ret.query)->required();
  r->add_option("--k", ret.k);
  r->add_option("--tie-policy", ret.tie_policy)->check(CLI::IsMember(kTiePolicies));
  r->add_option("--tie-seed", ret.tie_seed);

  RolloutArgs roll;
  auto* ro = app.add_subcommand("rollout", "Run episodes and write episode logs");
  ro->add_option("--task-type", roll.task_type);
  ro->add_option("--object", roll.object);
  ro->add_option("--receptacle", roll.receptacle);
  ro->add_option("--seed", roll.seed);
  ro->add_option("--split", roll.split)->check(CLI::IsMember({"easy", "hard"}));
  ro->add_option("--count", roll.count);
  ro->add_option("--policy", roll.policy)->check(CLI::IsMember({"naive_placer", "memory_follower", "remote_chat"}));
  ro->add_option("--mode", roll.mode)->check(CLI::IsMember({"none", "static", "dynamic"}));
  ro->add_option("--k", roll.k);
  ro->add_option("--index", roll.index);
  ro->add_option("--store", roll.store, "Store the index was built from");
  ro->add_option("--fmt", roll.fmt)->check(CLI::IsMember(kFormats));
  ro->add_option("--max-steps", roll.max_steps, "0: per-task default");
  ro->add_option("--tie-policy", roll.tie_policy)->check(CLI::IsMember(kTiePolicies));
  ro->add_option("--tie-seed", roll.tie_seed);
  ro->add_option("--env", roll.env)->check(CLI::IsMember({"mini", "external"}));
  ro->add_option("--env-command", roll.env_command)->expected(1, -1);
  ro->add_option("--prompts-dir", roll.prompts_dir);
  ro->add_option("--out", roll.out);

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Run an ablation grid from a config file");
  sw->add_option("--config", sweep.config)->required();
  sw->add_option("--out", sweep.out)->required();

  ExportArgs ex;
  auto* e = app.add_subcommand("export-sft", "Write a fine-tuning dataset");
  e->add_option("--store", ex.store)->required();
  e->add_option("--mode", ex.mode)->check(CLI::IsMember({"plain", "exprag"}));
  e->add_option("--index", ex.index);
  e->add_option("--retrieval-store", ex.retrieval_store, "Store the index was built from (default: --store)");
  e->add_option("--k", ex.k);
  e->add_option("--fmt", ex.fmt)->check(CLI::IsMember(kFormats));
  e->add_option("--query", ex.query)->check(CLI::IsMember({"static", "dynamic"}));
  e->add_option("--tie-policy", ex.tie_policy)->check(CLI::IsMember(kTiePolicies));
  e->add_option("--tie-seed", ex.tie_seed);
  e->add_flag("--no-leave-one-out", ex.no_leave_one_out);
  e->add_option("--prompts-dir", ex.prompts_dir);
  e->add_option("--out", ex.out)->required();

  ReportArgs rep;
  auto* rp = app.add_subcommand("report", "Render a result table");
  rp->add_option("--table", rep.table)->required();
  rp->add_option("--format", rep.format)->check(CLI::IsMember({"csv", "md", "markdown"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    out << target->help();
    return kOk;
  } catch (const CLI::ParseError& pe) {
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    err << "error: " << pe.what() << "\n\n" << target->help();
    return kUsage;
  }

  try {
    if (c->parsed()) return run_collect(collect, workers, err);
    if (build->parsed()) return run_index_build(idx, err);
    if (r->parsed()) return run_retrieve(ret, out);
    if (ro->parsed()) return run_rollout(roll, workers, out, err);
    if (sw->parsed()) return run_sweep_cmd(sweep, workers, workers_opt->count() > 0, err);
    if (e->parsed()) return run_export(ex, workers, err);
    if (rp->parsed()) return run_report(rep, out);
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << "\n";
    return kFailure;
  }
  err << app.help();
  return kUsage;
}

}  // namespace exprag::cli
