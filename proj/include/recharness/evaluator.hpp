#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recharness/baselines.hpp"
#include "recharness/candidates.hpp"
#include "recharness/corpus.hpp"
#include "recharness/interest.hpp"
#include "recharness/llm.hpp"
#include "recharness/prompting.hpp"

namespace recharness::evaluator {

/// Single-relevant NDCG: 1/log2(rank+1) when rank <= k, else 0.
double ndcg_at_k(std::optional<std::size_t> gt_rank, std::size_t k);

/// Pearson correlation of average ranks; 0 when either side is constant.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);

enum class CandidateMode { Random, Recalled };

CandidateMode parse_candidate_mode(std::string_view name);
std::string_view candidate_mode_name(CandidateMode mode);

struct RankingPipeline {
  interest::InterestForm form = interest::InterestForm::RecentItems;
  interest::InterestContext interest;  // its llm handles interest-side calls
  CandidateMode mode = CandidateMode::Random;
  std::size_t k = 20;
  const std::vector<std::string>* item_pool = nullptr;  // Random mode
  const baselines::Model* model = nullptr;              // Recalled mode
  prompting::PromptConfig prompt;
  llm::LanguageModel* llm = nullptr;
  /// Demonstration pool for icl=others (defaults to the evaluated instances).
  const std::vector<corpus::EvalInstance>* demo_pool = nullptr;
  int parallelism = 1;
};

/// Throws before any LLM call when the pipeline is inconsistent.
void validate_pipeline(const RankingPipeline& pipeline);

struct MetricsRow {
  std::string user_id;
  bool covered = false;
  std::optional<std::size_t> gt_rank;
  double ndcg1 = 0.0;
  double ndcg10 = 0.0;
  double ndcg20 = 0.0;
  bool failed = false;
  std::string error;
  std::optional<std::size_t> gt_index;  // presented position, 0-based
  std::size_t unmatched_lines = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t llm_calls = 0;
  std::string raw_output;
  double latency_s = 0.0;  // wall time of the ranking call(s)
};

struct Aggregate {
  double coverage = 0.0;
  double ndcg1 = 0.0;
  double ndcg10 = 0.0;
  double ndcg20 = 0.0;
  std::size_t failures = 0;
  double inference_time_s = 0.0;  // mean per instance
};

/// Unweighted mean over rows; failed rows count as uncovered zeros.
Aggregate aggregate_rows(const std::vector<MetricsRow>& rows);
/// Arithmetic mean of per-repeat aggregates.
Aggregate mean_of(const std::vector<Aggregate>& per_repeat);

struct MetricsReport {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricsRow>> rows;  // [repeat][instance]
  std::vector<Aggregate> per_repeat;
  Aggregate aggregate;
  std::size_t interest_llm_calls = 0;
  std::size_t ranking_llm_calls = 0;
  double wall_time_s = 0.0;

  /// Deterministic report (no wall-clock fields).
  std::string to_json() const;
  /// Rows per repeat plus a mean row; timing column "NA" unless requested.
  std::string to_csv(bool with_timing) const;
  std::string timing_json() const;
  /// Raw model outputs, one JSON line per (repeat, instance).
  std::string outputs_jsonl() const;
};

MetricsReport run_ranking_eval(const std::vector<corpus::EvalInstance>& instances,
                               const RankingPipeline& pipeline,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& config_hash = "");

struct BiasPair {
  std::string user_id;
  std::size_t trial = 0;
  std::size_t input_position = 0;  // 1-based
  std::size_t output_rank = 0;     // 1-based
};

struct BiasProbeResult {
  std::size_t permutations = 0;
  std::vector<BiasPair> pairs;
  std::size_t uncovered = 0;
  std::size_t failed = 0;
  std::size_t skipped_instances = 0;  // ground truth not in the candidate set
  double spearman_rho = 0.0;

  std::string to_json() const;
};

/// Holds each instance's candidate multiset fixed and presents it in
/// `permutations` seeded orders.
BiasProbeResult position_bias_probe(const std::vector<corpus::EvalInstance>& instances,
                                    const RankingPipeline& pipeline, std::size_t permutations,
                                    std::uint64_t seed);

}  // namespace recharness::evaluator
