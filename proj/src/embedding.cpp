#include "recharness/embedding.hpp"

#include <cmath>

#include "recharness/kernels.hpp"

namespace recharness::llm {

double EmbeddingVector::norm() const { return kernels::norm(values); }

bool EmbeddingVector::is_zero() const {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

double inner_product(const EmbeddingVector& a, const EmbeddingVector& b) {
  return kernels::dot(a.values, b.values);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return inner_product(a, b) / (na * nb);
}

void l2_normalize(std::vector<double>& v) {
  const double n = kernels::norm(v);
  if (n == 0.0) return;
  for (double& x : v) x /= n;
}

HashedBowEmbedder::HashedBowEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedder dimension must be >= 1");
}

std::string HashedBowEmbedder::describe() const {
  return "hashed-bow:fnv1a64:dim=" + std::to_string(dim_);
}

std::vector<std::string> HashedBowEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t HashedBowEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

EmbeddingVector HashedBowEmbedder::embed(std::string_view text) const {
  EmbeddingVector v;
  v.values.assign(dim_, 0.0);
  for (const auto& t : tokenize(text)) v.values[bucket(t)] += 1.0;
  l2_normalize(v.values);
  return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {}

std::string RemoteEmbedder::describe() const {
  return "remote:" + cfg_.base_url + ":" + cfg_.model;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  nlohmann::json payload;
  payload["model"] = cfg_.model;
  payload["input"] = std::string(text);
  auto res = post_json_with_retry(cfg_.base_url, "/embeddings", payload, cfg_.api_key_env,
                                  cfg_.timeout, cfg_.retry, fnv1a64(text));
  const auto& j = res.body;
  if (!j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
      !j["data"][0].contains("embedding")) {
    throw LlmError("embedding response lacks data[0].embedding", 200, res.attempts);
  }
  EmbeddingVector v;
  v.values = j["data"][0]["embedding"].get<std::vector<double>>();
  if (cfg_.dim != 0 && v.values.size() != cfg_.dim) {
    throw LlmError("embedding dimension " + std::to_string(v.values.size()) +
                       " != declared " + std::to_string(cfg_.dim),
                   200, res.attempts);
  }
  l2_normalize(v.values);
  return v;
}

}  // namespace recharness::llm
