#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "recharness/corpus.hpp"

namespace recharness::baselines {

/// Candidates in a random order; `items` is the recall universe.
struct RandomModel {
  std::uint64_t seed = 0;
  std::vector<std::string> items;
};

/// Interaction counts in the training set.
struct PopModel {
  std::map<std::string, std::uint64_t> count;
};

struct BprParams {
  std::size_t dim = 64;
  double learning_rate = 0.05;
  double reg = 1e-4;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
};

/// Pairwise-trained matrix factorization without bias terms. Factor rows are
/// stored contiguously (row-major) in id order.
struct BprModel {
  BprParams params;
  std::vector<std::string> user_ids;  // sorted
  std::vector<std::string> item_ids;  // sorted
  std::vector<double> user_factors;   // user_ids.size() * dim
  std::vector<double> item_factors;   // item_ids.size() * dim

  std::size_t dim() const { return params.dim; }
  /// Index of an id, or -1 when unknown.
  std::ptrdiff_t user_index(const std::string& id) const;
  std::ptrdiff_t item_index(const std::string& id) const;
  std::span<const double> user(std::size_t u) const;
  std::span<const double> item(std::size_t i) const;
  std::span<double> user(std::size_t u);
  std::span<double> item(std::size_t i);
};

using Model = std::variant<RandomModel, PopModel, BprModel>;

RandomModel fit_random(const std::vector<corpus::Interaction>& interactions,
                       std::uint64_t seed);
PopModel fit_pop(const std::vector<corpus::Interaction>& interactions);

/// Model after initialization only: factors ~ Normal(0, 0.1/sqrt(d)).
BprModel init_bpr(const std::vector<corpus::Interaction>& interactions,
                  const BprParams& params);
BprModel fit_bpr(const std::vector<corpus::Interaction>& interactions,
                 const BprParams& params);

/// One stochastic ascent step on the triple (u, i, j), all three updates
/// computed from the pre-step values:
///   g    = sigma(-(p_u . (q_i - q_j)))
///   p_u += lr * (g * (q_i - q_j) - reg * p_u)
///   q_i += lr * (g * p_u - reg * q_i)
///   q_j += lr * (-g * p_u - reg * q_j)
void bpr_sgd_step(std::span<double> pu, std::span<double> qi, std::span<double> qj,
                  double learning_rate, double reg);

/// Per-triple regularized objective whose gradient the step above ascends:
///   ln sigma(p_u . q_i - p_u . q_j) - reg/2 * (|p_u|^2 + |q_i|^2 + |q_j|^2)
double bpr_triple_objective(std::span<const double> pu, std::span<const double> qi,
                            std::span<const double> qj, double reg);

double score(const Model& model, const std::string& user_id, const std::string& item_id);

/// Descending score with ties by item_id; Random returns a seeded permutation.
std::vector<std::string> rank_candidates(const Model& model, const std::string& user_id,
                                         const std::vector<std::string>& candidates,
                                         std::uint64_t seed);

/// Top-k over the model's item universe minus `exclude`.
std::vector<std::string> recall_top_k(const Model& model, const std::string& user_id,
                                      std::size_t k, const std::set<std::string>& exclude,
                                      std::vector<std::string>* warnings = nullptr);

std::string model_kind(const Model& model);

/// Text checkpoint: a header line then one line per entity.
std::string save_model(const Model& model);
Model load_model(const std::string& text);

}  // namespace recharness::baselines
