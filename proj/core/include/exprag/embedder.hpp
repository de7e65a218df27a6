#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exprag/endpoint.hpp"

namespace exprag {

// Unit-norm key/query embedding. Components are stored as f32 so an index
// persisted to disk reproduces in-memory scores bit for bit.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Takes values as given; use normalized() to build from raw features.
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}

  // L2-normalizes in double precision. Throws DegenerateInput on a zero vector.
  static EmbeddingVector normalized(std::span<const double> raw);
  static EmbeddingVector normalized(std::span<const float> raw);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  double norm() const;

  EmbeddingVector operator-() const;
  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<float> values_;
};

// Dot product accumulated in double over ascending component index.
double dot(std::span<const float> a, std::span<const float> b);

// Throws DimensionMismatch when dims differ.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;

  // 0 when a remote backend has not learned its dimension yet.
  virtual std::size_t dim() const = 0;
  // Stable identifier recorded in index manifests, e.g. "local_hash:256".
  virtual std::string id() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const;
};

// Signed feature hashing of boundary-padded word bigrams.
class LocalHashEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit LocalHashEmbedder(std::size_t dim = kDefaultDim);

  std::size_t dim() const override { return dim_; }
  std::string id() const override;
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

// Client for an OpenAI-compatible /v1/embeddings endpoint.
class RemoteEmbedder final : public Embedder {
 public:
  // expected_dim = 0 accepts the first reply's dimension and pins it.
  explicit RemoteEmbedder(EndpointConfig endpoint, std::size_t expected_dim = 0);

  static std::unique_ptr<RemoteEmbedder> from_env();

  std::size_t dim() const override { return dim_.load(); }
  std::string id() const override;
  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  JsonEndpointClient client_;
  std::string model_;
  mutable std::atomic<std::size_t> dim_;
};

// Rebuilds an embedder from the identifier stored in an index manifest.
// "local_hash:<dim>" or "remote:<model>" (remote reads EXPRAG_EMBED_* env vars).
std::unique_ptr<Embedder> make_embedder(std::string_view id);

}  // namespace exprag
