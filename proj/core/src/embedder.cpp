#include "exprag/embedder.hpp"

#include <cmath>
#include <cstdint>

#include "exprag/error.hpp"

namespace exprag {

namespace {

// FNV-1a 64 followed by the murmur3 finalizer so low bits spread well.
std::uint64_t feature_hash(std::string_view left, std::string_view right) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (unsigned char c : left) mix(c);
  mix(0x1f);
  for (unsigned char c : right) mix(c);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> lowercase_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (is_space(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

template <typename T>
EmbeddingVector normalize_impl(std::span<const T> raw) {
  double sq = 0.0;
  for (T v : raw) sq += static_cast<double>(v) * static_cast<double>(v);
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    throw DegenerateInput("cannot normalize a zero or non-finite vector");
  }
  const double inv = 1.0 / std::sqrt(sq);
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(raw[i]) * inv);
  }
  return EmbeddingVector(std::move(out));
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::span<const double> raw) { return normalize_impl(raw); }

EmbeddingVector EmbeddingVector::normalized(std::span<const float> raw) { return normalize_impl(raw); }

double EmbeddingVector::norm() const { return std::sqrt(dot(values_, values_)); }

EmbeddingVector EmbeddingVector::operator-() const {
  std::vector<float> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = -values_[i];
  return EmbeddingVector(std::move(out));
}

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  return dot(a.values(), b.values());
}

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

LocalHashEmbedder::LocalHashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw ConfigError("local_hash embedder needs a positive dimension");
}

std::string LocalHashEmbedder::id() const { return "local_hash:" + std::to_string(dim_); }

EmbeddingVector LocalHashEmbedder::embed(std::string_view text) const {
  const auto words = lowercase_words(text);
  if (words.empty()) throw DegenerateInput("text is empty after normalization");

  static constexpr std::string_view kBegin = "<s>";
  static constexpr std::string_view kEnd = "</s>";
  std::vector<double> raw(dim_, 0.0);
  for (std::size_t i = 0; i <= words.size(); ++i) {
    std::string_view left = i == 0 ? kBegin : std::string_view(words[i - 1]);
    std::string_view right = i == words.size() ? kEnd : std::string_view(words[i]);
    const std::uint64_t h = feature_hash(left, right);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    raw[h % dim_] += sign;
  }
  return EmbeddingVector::normalized(std::span<const double>(raw));
}

RemoteEmbedder::RemoteEmbedder(EndpointConfig endpoint, std::size_t expected_dim)
    : client_(endpoint), model_(endpoint.model), dim_(expected_dim) {}

std::unique_ptr<RemoteEmbedder> RemoteEmbedder::from_env() {
  auto cfg = EndpointConfig::from_env("EXPRAG_EMBED");
  std::size_t dim = 0;
  if (const char* d = std::getenv("EXPRAG_EMBED_DIM")) dim = std::stoul(d);
  return std::make_unique<RemoteEmbedder>(std::move(cfg), dim);
}

std::string RemoteEmbedder::id() const { return "remote:" + model_; }

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  return embed_batch({std::string(text)}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  for (const auto& t : texts) {
    if (t.empty()) throw DegenerateInput("cannot embed empty text");
  }
  nlohmann::json body{{"model", model_}, {"input", texts}};
  const nlohmann::json reply = client_.post("/v1/embeddings", body);

  const auto data = reply.find("data");
  if (data == reply.end() || !data->is_array()) throw ParseError("data", "missing embeddings array");
  if (data->size() != texts.size()) {
    throw ParseError("data", "expected " + std::to_string(texts.size()) + " embeddings, got " +
                                 std::to_string(data->size()));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < data->size(); ++i) {
    const auto& item = (*data)[i];
    const auto emb = item.find("embedding");
    const std::string field = "data[" + std::to_string(i) + "].embedding";
    if (emb == item.end() || !emb->is_array()) throw ParseError(field, "missing vector");
    std::vector<double> raw;
    raw.reserve(emb->size());
    for (const auto& v : *emb) {
      if (!v.is_number()) throw ParseError(field, "non-numeric component");
      raw.push_back(v.get<double>());
    }
    std::size_t expected = 0;
    if (!dim_.compare_exchange_strong(expected, raw.size()) && expected != raw.size()) {
      throw DimensionMismatch(expected, raw.size());
    }
    out.push_back(EmbeddingVector::normalized(std::span<const double>(raw)));
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(std::string_view id) {
  constexpr std::string_view kLocal = "local_hash:";
  constexpr std::string_view kRemote = "remote:";
  if (id.starts_with(kLocal)) {
    const std::string dim(id.substr(kLocal.size()));
    std::size_t parsed = 0;
    try {
      parsed = std::stoul(dim);
    } catch (const std::exception&) {
      throw ConfigError("bad embedder id '" + std::string(id) + "'");
    }
    return std::make_unique<LocalHashEmbedder>(parsed);
  }
  if (id == "local_hash") return std::make_unique<LocalHashEmbedder>();
  if (id.starts_with(kRemote)) {
    auto remote = RemoteEmbedder::from_env();
    if (remote->id() != id) {
      throw ConfigError("EXPRAG_EMBED_MODEL does not match index embedder '" + std::string(id) + "'");
    }
    return remote;
  }
  throw ConfigError("unknown embedder '" + std::string(id) + "'");
}

}  // namespace exprag
