#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recharness/baselines.hpp"
#include "recharness/chat_client.hpp"
#include "recharness/embedding.hpp"
#include "recharness/evaluator.hpp"
#include "recharness/interest.hpp"
#include "recharness/llm.hpp"
#include "recharness/prompting.hpp"

namespace recharness::config {

struct DatasetConfig {
  std::string kind = "movielens";  // movielens | amazon_books
  std::string ratings;             // MovieLens ratings.dat
  std::string movies;              // MovieLens movies.dat
  std::string reviews;             // Amazon reviews JSON Lines
  std::string meta;                // Amazon metadata JSON Lines
  std::string descriptions;        // optional {item_id, description} JSON Lines
  std::size_t k_core = 0;
};

struct SampleConfig {
  std::size_t n_users = 200;
  std::uint64_t seed = 42;
  std::size_t repeats = 3;
  std::size_t min_history = 11;
  std::vector<std::uint64_t> repeat_seeds;  // derived from seed when empty
};

struct InterestConfig {
  int form = 1;
  double recency_lambda = 0.1;
  std::size_t window = 10;
  interest::Scope retrieval_memory = interest::Scope::Personalized;
};

struct CandidatesConfig {
  evaluator::CandidateMode mode = evaluator::CandidateMode::Random;
  std::size_t k = 20;
};

struct LlmConfig {
  std::string provider = "mock";  // mock | openai
  llm::MockKind mock_kind = llm::MockKind::Echo;
  llm::MockParams mock;
  llm::EndpointConfig endpoint;
};

struct EmbedderConfig {
  std::string provider = "hashed";  // hashed | remote
  std::size_t dim = 256;
  std::string base_url;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
};

struct CtrConfig {
  std::size_t latest_n = 10000;
  std::array<std::size_t, 3> ratio{8, 1, 1};
  std::optional<double> threshold;  // dataset default when absent
  std::size_t history_len = 10;
  std::vector<prompting::CtrStyle> styles{prompting::kAllCtrStyles,
                                          prompting::kAllCtrStyles + 4};
  std::string eval_split = "test";
  prompting::CtrStyle export_style = prompting::CtrStyle::Implicit;

  double resolved_threshold(const std::string& dataset_kind) const;
};

struct BiasConfig {
  std::size_t permutations = 5;
  std::uint64_t seed = 7;
};

struct OutputConfig {
  std::string dir = "out";
  bool timing = false;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SampleConfig sample;
  InterestConfig interest;
  CandidatesConfig candidates;
  prompting::PromptConfig prompt;
  LlmConfig llm;
  EmbedderConfig embedder;
  baselines::BprParams bpr;
  std::string baseline_kind = "bpr";  // bpr | pop | random
  CtrConfig ctr;
  BiasConfig bias;
  OutputConfig output;
  int parallelism = 1;

  /// Fully resolved configuration (defaults filled in).
  nlohmann::ordered_json resolved;

  /// SHA-256 of the resolved configuration minus the output block.
  std::string hash() const;
  std::vector<std::uint64_t> repeat_seeds() const;
};

/// The default configuration document; every accepted key appears here.
nlohmann::ordered_json default_document();

/// Applies one `dotted.key=value` override. The value is parsed as JSON when
/// possible, else taken as a string.
void apply_override(nlohmann::ordered_json& doc, const std::string& assignment);

/// Merges `user` over the defaults, rejecting unknown keys and mistyped
/// values, then validates. Throws ConfigError naming the offending field.
ExperimentConfig resolve(const nlohmann::ordered_json& user,
                         const std::vector<std::string>& overrides = {});

ExperimentConfig load(const std::optional<std::string>& path,
                      const std::vector<std::string>& overrides = {});

}  // namespace recharness::config
