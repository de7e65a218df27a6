#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>

#include "exprag/embedder.hpp"
#include "exprag/error.hpp"
#include "support/generators.hpp"
#include "support/mock_server.hpp"

namespace exprag {
namespace {

std::vector<std::pair<std::size_t, double>> nonzero(const EmbeddingVector& v) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v.values()[i] != 0.0f) out.emplace_back(i, v.values()[i]);
  }
  return out;
}

TEST(LocalHash, Deterministic) {
  LocalHashEmbedder e;
  EXPECT_EQ(e.embed("look look"), e.embed("look look"));
  EXPECT_EQ(e.embed("Look   LOOK\n"), e.embed("look look"));
}

// Frozen from an independent reimplementation of the hashing scheme.
TEST(LocalHash, MatchesFrozenOracleVectors) {
  LocalHashEmbedder e(256);
  const double a = 1.0 / std::sqrt(3.0);
  const std::vector<std::pair<std::size_t, double>> look{{94, a}, {106, -a}, {228, -a}};
  const auto got = nonzero(e.embed("look look"));
  ASSERT_EQ(got.size(), look.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].first, look[i].first);
    EXPECT_NEAR(got[i].second, look[i].second, 1e-7);
  }
  const double b = 1.0 / std::sqrt(6.0);
  const std::vector<std::pair<std::size_t, double>> candle{{31, -b}, {80, b}, {106, -b}, {169, -b}, {191, b}, {212, b}};
  const auto got2 = nonzero(e.embed("Put a candle in drawer."));
  ASSERT_EQ(got2.size(), candle.size());
  for (std::size_t i = 0; i < got2.size(); ++i) {
    EXPECT_EQ(got2[i].first, candle[i].first);
    EXPECT_NEAR(got2[i].second, candle[i].second, 1e-7);
  }
  EXPECT_NEAR(similarity(e.embed("put a candle in drawer 1."), e.embed("put a apple in drawer 1.")), 5.0 / 7.0, 1e-6);
}

TEST(LocalHash, UnitNorm) {
  LocalHashEmbedder e;
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) EXPECT_NEAR(e.embed(testing::random_text(rng, 30)).norm(), 1.0, 1e-6);
}

TEST(LocalHash, EmptyTextIsDegenerate) {
  LocalHashEmbedder e;
  EXPECT_THROW(e.embed(""), DegenerateInput);
  EXPECT_THROW(e.embed(" \n\t"), DegenerateInput);
}

// Signed hashing of independent features gives dot products with standard
// deviation near 1/sqrt(dim); the bound applies to mean and RMS over pairs.
TEST(LocalHash, DisjointVocabulariesAreNearOrthogonal) {
  LocalHashEmbedder e(256);
  std::mt19937_64 rng(22);
  double sum = 0.0;
  double sq = 0.0;
  const int pairs = 500;
  for (int p = 0; p < pairs; ++p) {
    std::string a;
    std::string b;
    for (int w = 0; w < 10; ++w) {
      a += "a" + std::to_string(rng() % 100000) + " ";
      b += "b" + std::to_string(rng() % 100000) + " ";
    }
    const double d = similarity(e.embed(a), e.embed(b));
    sum += d;
    sq += d * d;
  }
  EXPECT_LE(std::fabs(sum / pairs), 0.01);
  EXPECT_LE(std::sqrt(sq / pairs), 0.1);
}

TEST(Similarity, SelfAndAntipodal) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 50; ++i) {
    const auto v = testing::random_unit(rng, 64);
    EXPECT_NEAR(similarity(v, v), 1.0, 1e-6);
    EXPECT_NEAR(similarity(v, -v), -1.0, 1e-6);
  }
}

TEST(Similarity, MatchesScalarLoop) {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 200; ++i) {
    const auto a = testing::random_unit(rng, 48);
    const auto b = testing::random_unit(rng, 48);
    long double s = 0.0L;
    for (std::size_t j = 0; j < 48; ++j) s += static_cast<long double>(a.values()[j]) * b.values()[j];
    EXPECT_NEAR(similarity(a, b), static_cast<double>(s), 1e-9);
  }
}

TEST(Similarity, DimensionMismatchThrows) {
  std::mt19937_64 rng(25);
  EXPECT_THROW(similarity(testing::random_unit(rng, 4), testing::random_unit(rng, 5)), DimensionMismatch);
  EXPECT_THROW(EmbeddingVector::normalized(std::vector<double>(4, 0.0)), DegenerateInput);
}

TEST(MakeEmbedder, ParsesIds) {
  EXPECT_EQ(make_embedder("local_hash:64")->dim(), 64u);
  EXPECT_EQ(make_embedder("local_hash")->id(), "local_hash:256");
  EXPECT_THROW(make_embedder("local_hash:x"), ConfigError);
  EXPECT_THROW(make_embedder("word2vec"), ConfigError);
}

EndpointConfig config_for(const testing::MockServer& s) {
  EndpointConfig c;
  c.base_url = s.url();
  c.model = "m";
  c.token = "secret";
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(2000);
  return c;
}

TEST(RemoteEmbedder, NormalizesAndPinsDimension) {
  testing::MockServer server;
  server.on_post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer secret");
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    for (const auto& text : body["input"]) {
      const double len = static_cast<double>(text.get<std::string>().size());
      data.push_back({{"embedding", {3.0 * len, 4.0 * len}}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  server.start();
  RemoteEmbedder e(config_for(server));
  EXPECT_EQ(e.dim(), 0u);
  const auto vs = e.embed_batch({"ab", "abc"});
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_NEAR(vs[0].values()[0], 0.6, 1e-7);
  EXPECT_NEAR(vs[1].values()[1], 0.8, 1e-7);
  EXPECT_EQ(e.dim(), 2u);
  EXPECT_EQ(e.id(), "remote:m");
  EXPECT_THROW(e.embed(""), DegenerateInput);
}

TEST(RemoteEmbedder, RejectsDimensionDrift) {
  testing::MockServer server;
  server.on_post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[{"embedding":[1,2,3]}]})", "application/json");
  });
  server.start();
  RemoteEmbedder e(config_for(server), 2);
  EXPECT_THROW(e.embed("x"), DimensionMismatch);
}

TEST(Endpoint, RetriesRetriableStatusThenSucceeds) {
  testing::MockServer server;
  std::atomic<int> calls{0};
  server.on_post("/v1/embeddings", [&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"data":[{"embedding":[1,0]}]})", "application/json");
  });
  server.start();
  RemoteEmbedder e(config_for(server));
  EXPECT_EQ(e.embed("x").values()[0], 1.0f);
  EXPECT_EQ(calls.load(), 3);
}

TEST(Endpoint, NonRetriableStatusSurfacesImmediately) {
  testing::MockServer server;
  server.on_post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("no", "text/plain");
  });
  server.start();
  RemoteEmbedder e(config_for(server));
  try {
    e.embed("x");
    FAIL() << "expected HttpStatusError";
  } catch (const HttpStatusError& err) {
    EXPECT_EQ(err.status(), 401);
  }
  EXPECT_EQ(server.hits(), 1);
}

TEST(Endpoint, MalformedBodyIsParseError) {
  testing::MockServer server;
  server.on_post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{not json", "application/json");
  });
  server.start();
  RemoteEmbedder e(config_for(server));
  EXPECT_THROW(e.embed("x"), ParseError);
}

TEST(Endpoint, UnreachableHostIsTransportError) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.model = "m";
  c.max_attempts = 2;
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(500);
  RemoteEmbedder e(c);
  EXPECT_THROW(e.embed("x"), TransportError);
}

}  // namespace
}  // namespace exprag
