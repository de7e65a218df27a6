// Persisted index layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "EXPRAGIX"
//   8       4     format version
//   12      4     dim
//   16      8     entry count N
//   24      8     trailer byte length
//   32      8     FNV-1a 64 checksum of matrix + trailer
//   40      N*dim*4  f32 key matrix, row-major
//   ...     trailer: JSONL, manifest line then one line per entry
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "exprag/error.hpp"
#include "exprag/experience_index.hpp"

namespace exprag {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'E', 'X', 'P', 'R', 'A', 'G', 'I', 'X'};
constexpr std::size_t kHeaderBytes = 40;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ordered_json filter_json(const IndexFilter& f) {
  ordered_json splits = ordered_json::array();
  for (Split s : f.splits) splits.push_back(std::string(to_string(s)));
  ordered_json outcomes = ordered_json::array();
  for (OutcomeClass o : f.outcomes) outcomes.push_back(o == OutcomeClass::success ? "success" : "failure");
  ordered_json excluded = ordered_json::array();
  for (const auto& id : f.exclude_ids) excluded.push_back(id);
  return ordered_json{{"splits", splits}, {"outcomes", outcomes}, {"exclude_ids", excluded}};
}

IndexFilter filter_from_json(const nlohmann::json& j) {
  IndexFilter f;
  for (const auto& s : j.at("splits")) f.splits.insert(split_from_string(s.get<std::string>()));
  for (const auto& o : j.at("outcomes")) {
    const auto v = o.get<std::string>();
    if (v == "success") f.outcomes.insert(OutcomeClass::success);
    else if (v == "failure") f.outcomes.insert(OutcomeClass::failure);
    else throw CorruptIndexError("unknown outcome class '" + v + "'");
  }
  for (const auto& id : j.at("exclude_ids")) f.exclude_ids.insert(id.get<std::string>());
  return f;
}

}  // namespace

std::string encode_index(const ExperienceIndex& index) {
  const auto& entries = index.entries();
  std::string body;
  body.reserve(entries.size() * index.dim() * 4);
  for (const auto& e : entries) {
    for (float v : e.embedding.values()) put_u32(body, std::bit_cast<std::uint32_t>(v));
  }

  const auto& m = index.manifest();
  ordered_json manifest;
  manifest["format"] = "exprag-index";
  manifest["version"] = kIndexFormatVersion;
  manifest["store_path"] = m.store_path;
  manifest["filter"] = filter_json(m.filter);
  manifest["key_mode"] = std::string(to_string(m.key_mode));
  manifest["embedder"] = m.embedder_id;
  manifest["dim"] = index.dim();
  manifest["count"] = entries.size();
  std::string trailer = manifest.dump() + "\n";
  for (const auto& e : entries) {
    ordered_json line;
    line["traj_id"] = e.traj_id;
    line["outcome"] = ordered_json{{"success", e.outcome.success}, {"score", e.outcome.score}};
    line["meta"] = ordered_json{{"env_name", e.meta.env_name},
                                {"task_type", e.meta.task_type},
                                {"split", std::string(to_string(e.meta.split))},
                                {"variation_id", e.meta.variation_id},
                                {"seed", e.meta.seed}};
    trailer += line.dump() + "\n";
  }
  const std::size_t matrix_bytes = body.size();
  body += trailer;

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kIndexFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(index.dim()));
  put_u64(out, entries.size());
  put_u64(out, body.size() - matrix_bytes);
  put_u64(out, fnv1a(body));
  out += body;
  return out;
}

ExperienceIndex decode_index(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) throw CorruptIndexError("index file shorter than its header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptIndexError("bad magic, not an exprag index");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kIndexFormatVersion) {
    throw IndexVersionError("index format version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kIndexFormatVersion) + ")");
  }
  const std::uint64_t dim = get_u32(bytes, 12);
  const std::uint64_t count = get_u64(bytes, 16);
  const std::uint64_t trailer_bytes = get_u64(bytes, 24);
  const std::uint64_t checksum = get_u64(bytes, 32);

  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (dim != 0 && count > kMax / (dim * 4)) throw CorruptIndexError("entry count overflows");
  const std::uint64_t matrix_bytes = count * dim * 4;
  if (bytes.size() - kHeaderBytes != matrix_bytes + trailer_bytes) {
    throw CorruptIndexError("index file size does not match its header (truncated?)");
  }
  const std::string_view body = bytes.substr(kHeaderBytes);
  if (fnv1a(body) != checksum) throw CorruptIndexError("index checksum mismatch");

  std::istringstream trailer(std::string(body.substr(matrix_bytes)));
  std::string line;
  try {
    if (!std::getline(trailer, line)) throw CorruptIndexError("missing manifest");
    const auto manifest = nlohmann::json::parse(line);
    if (manifest.at("dim").get<std::uint64_t>() != dim || manifest.at("count").get<std::uint64_t>() != count) {
      throw CorruptIndexError("manifest disagrees with header");
    }
    IndexManifest m{manifest.at("store_path").get<std::string>(), filter_from_json(manifest.at("filter")),
                    key_mode_from_string(manifest.at("key_mode").get<std::string>()),
                    manifest.at("embedder").get<std::string>()};

    std::vector<IndexEntry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      if (!std::getline(trailer, line)) throw CorruptIndexError("missing entry record " + std::to_string(i));
      const auto rec = nlohmann::json::parse(line);
      std::vector<float> values(dim);
      for (std::uint64_t d = 0; d < dim; ++d) {
        values[d] = std::bit_cast<float>(get_u32(body, (i * dim + d) * 4));
      }
      const auto& meta = rec.at("meta");
      entries.push_back(IndexEntry{
          rec.at("traj_id").get<std::string>(), EmbeddingVector(std::move(values)),
          Outcome{rec.at("outcome").at("success").get<bool>(), rec.at("outcome").at("score").get<double>()},
          TaskMeta{meta.at("env_name").get<std::string>(), meta.at("task_type").get<std::string>(),
                   split_from_string(meta.at("split").get<std::string>()),
                   meta.at("variation_id").get<std::int64_t>(), meta.at("seed").get<std::int64_t>()}});
    }
    return ExperienceIndex(std::move(entries), dim, std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptIndexError(std::string("bad index trailer: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptIndexError(std::string("bad index trailer: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptIndexError(std::string("bad index trailer: ") + e.what());
  }
}

void save_index(const ExperienceIndex& index, const std::filesystem::path& path) {
  const std::string bytes = encode_index(index);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write index " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

ExperienceIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_index(buf.str());
}

}  // namespace exprag
