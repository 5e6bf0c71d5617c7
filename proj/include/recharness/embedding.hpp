#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include "recharness/chat_client.hpp"

namespace recharness::llm {

/// L2-normalized vector (norm 1 up to 1e-6), or all zeros.
struct EmbeddingVector {
  std::vector<double> values;

  double norm() const;
  bool is_zero() const;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double inner_product(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string describe() const = 0;
};

/// Local bag-of-words embedder.
///
/// Text is split into tokens made of ASCII letters/digits (lowercased) and
/// non-ASCII bytes; every other byte separates tokens. Each token adds 1 to
/// bucket `fnv1a64(token) % dim`, and the count vector is L2-normalized. No
/// tokens gives the zero vector.
class HashedBowEmbedder final : public Embedder {
 public:
  explicit HashedBowEmbedder(std::size_t dim = 256);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dim_; }
  std::string describe() const override;

  static std::vector<std::string> tokenize(std::string_view text);
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dim_;
};

struct RemoteEmbedderConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t dim = 0;  // 0: accept whatever the first response returns
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
};

/// Embeddings endpoint (`POST {base_url}/embeddings`), L2-normalized.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig cfg);

  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return cfg_.dim; }
  std::string describe() const override;

 private:
  RemoteEmbedderConfig cfg_;
};

void l2_normalize(std::vector<double>& v);

}  // namespace recharness::llm
