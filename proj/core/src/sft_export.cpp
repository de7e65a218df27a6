#include "exprag/sft_export.hpp"

#include <fstream>
#include <map>

#include "exprag/error.hpp"

namespace exprag {

namespace {

using ordered_json = nlohmann::ordered_json;

}  // namespace

std::string_view to_string(SftMode mode) { return mode == SftMode::plain ? "plain" : "exprag"; }

SftMode sft_mode_from_string(std::string_view text) {
  if (text == "plain") return SftMode::plain;
  if (text == "exprag") return SftMode::exprag;
  throw ConfigError("unknown export mode '" + std::string(text) + "'");
}

SftExport build_sft_samples(const std::vector<Trajectory>& store, const SftOptions& options,
                            const ExperienceIndex* index, const Embedder* embedder,
                            const std::vector<Trajectory>* retrieval_store) {
  const bool exprag = options.mode == SftMode::exprag;
  if (exprag) {
    if (!index || !embedder) throw ConfigError("exprag export needs an index and an embedder");
    if (options.k < 1) throw ConfigError("exprag export needs k >= 1");
    if (options.query == RetrievalMode::none) throw ConfigError("exprag export needs a static or dynamic query");
  }
  const TrajectoryLookup lookup(retrieval_store ? *retrieval_store : store);

  std::vector<const Trajectory*> sources;
  std::map<std::string, PromptTemplate> templates;
  for (const auto& t : store) {
    if (!t.outcome || !t.outcome->success) continue;
    sources.push_back(&t);
    if (!templates.contains(t.meta.env_name)) {
      templates.emplace(t.meta.env_name, options.prompts_dir ? load_template(*options.prompts_dir, t.meta.env_name)
                                                             : builtin_template(t.meta.env_name));
    }
  }

  std::vector<SftSample> samples(sources.size());
  std::vector<char> empty(sources.size(), 0);
  parallel_for(sources.size(), options.workers, [&](std::size_t i) {
    const Trajectory& t = *sources[i];
    SftSample& s = samples[i];
    s.source_id = t.id;
    MemoryBlock memory;
    if (exprag) {
      RetrievalOptions ropts{options.tie_policy, options.tie_seed, {}};
      if (options.leave_one_out) ropts.exclude_ids.insert(t.id);
      const std::string query = options.query == RetrievalMode::static_query
                                    ? build_static_query(t.task_description)
                                    : build_dynamic_query(partial_history(t, 1));
      std::vector<RetrievedTrajectory> retrieved;
      for (const auto& hit : retrieve_top_k(*index, query, options.k, *embedder, ropts)) {
        retrieved.push_back(RetrievedTrajectory{&lookup.at(hit.traj_id), hit.score});
        s.retrieved_ids.push_back(hit.traj_id);
      }
      memory = build_memory_block(retrieved, options.fmt);
      empty[i] = retrieved.empty() ? 1 : 0;
    }
    const PromptTemplate& tmpl = templates.at(t.meta.env_name);
    s.messages.push_back(ChatMessage{Role::system, compose_system_message(tmpl, memory)});
    for (const auto& turn : t.turns) {
      if (turn.role != Role::system) s.messages.push_back(turn);
    }
    for (const auto& m : s.messages) s.loss_mask.push_back(m.role == Role::assistant);
  });

  SftExport out;
  out.samples = std::move(samples);
  for (char e : empty) out.empty_memory_warnings += e ? 1 : 0;
  return out;
}

std::string sft_sample_line(const SftSample& sample) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : sample.messages) {
    messages.push_back(ordered_json{{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  ordered_json j;
  j["messages"] = std::move(messages);
  j["loss_mask"] = sample.loss_mask;
  j["provenance"] = ordered_json{{"source_id", sample.source_id}, {"retrieved_ids", sample.retrieved_ids}};
  return j.dump();
}

SftSample parse_sft_sample_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SftSample s;
    for (const auto& m : j.at("messages")) {
      s.messages.push_back(ChatMessage{role_from_string(m.at("role").get<std::string>()),
                                       m.at("content").get<std::string>()});
    }
    s.loss_mask = j.at("loss_mask").get<std::vector<bool>>();
    s.source_id = j.at("provenance").at("source_id").get<std::string>();
    s.retrieved_ids = j.at("provenance").at("retrieved_ids").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("<sft sample>", e.what());
  }
}

ordered_json sft_hyperparameters() {
  ordered_json h;
  h["optimizer"] = "PagedAdamW8bit";
  h["learning_rate"] = 5e-5;
  h["weight_decay"] = 0.0;
  h["lr_scheduler"] = "constant";
  h["lora_target_modules"] = {"q_proj", "v_proj", "k_proj", "output_proj"};
  h["lora_rank"] = 8;
  h["lora_alpha"] = 16;
  h["lora_dropout"] = 0.1;
  h["dtype"] = "bf16";
  h["decoding_temperature"] = 0.0;
  h["seed"] = 2025;
  h["epochs"] = ordered_json{{"alfworld", 9}, {"scienceworld", 29}};
  h["loss"] = "assistant_messages_only";
  return h;
}

ordered_json sft_manifest(const SftOptions& options, const SftExport& result, const ExperienceIndex* index) {
  const bool exprag = options.mode == SftMode::exprag;
  ordered_json m;
  m["format"] = "exprag-sft";
  m["mode"] = std::string(to_string(options.mode));
  m["k"] = exprag ? options.k : 0;
  m["fmt"] = std::string(to_string(options.fmt));
  m["query"] = exprag ? std::string(to_string(options.query)) : std::string("none");
  m["tie_policy"] = std::string(to_string(options.tie_policy));
  m["tie_seed"] = options.tie_seed;
  m["leave_one_out"] = exprag && options.leave_one_out;
  m["samples"] = result.samples.size();
  m["empty_memory_warnings"] = result.empty_memory_warnings;
  if (exprag && index) {
    m["index"] = ordered_json{{"store_path", index->manifest().store_path},
                              {"key_mode", std::string(to_string(index->manifest().key_mode))},
                              {"embedder", index->manifest().embedder_id},
                              {"entries", index->size()}};
  } else {
    m["index"] = nullptr;
  }
  m["hyperparameters"] = sft_hyperparameters();
  return m;
}

std::size_t export_sft(const std::vector<Trajectory>& store, const SftOptions& options,
                       const std::filesystem::path& out, const ExperienceIndex* index, const Embedder* embedder,
                       const std::vector<Trajectory>* retrieval_store) {
  const auto result = build_sft_samples(store, options, index, embedder, retrieval_store);
  {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + out.string());
    for (const auto& s : result.samples) f << sft_sample_line(s) << '\n';
    if (!f) throw Error("write failed for " + out.string());
  }
  const auto manifest_path = std::filesystem::path(out.string() + ".manifest.json");
  std::ofstream f(manifest_path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + manifest_path.string());
  f << sft_manifest(options, result, index).dump(2) << '\n';
  return result.samples.size();
}

SftSample strip_memory(SftSample sample) {
  if (sample.messages.empty() || sample.messages.front().role != Role::system) return sample;
  std::string& sys = sample.messages.front().content;
  const auto s = sys.find(std::string("\n\n") + std::string(kSuccessfulHeader));
  const auto u = sys.find(std::string("\n\n") + std::string(kUnsuccessfulHeader));
  const auto cut = std::min(s, u);
  if (cut != std::string::npos) sys.erase(cut);
  sample.retrieved_ids.clear();
  return sample;
}

}  // namespace exprag
