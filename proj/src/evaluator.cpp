#include "recharness/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "recharness/common.hpp"

namespace recharness::evaluator {

using ojson = nlohmann::ordered_json;

double ndcg_at_k(std::optional<std::size_t> gt_rank, std::size_t k) {
  if (!gt_rank || *gt_rank == 0 || *gt_rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*gt_rank) + 1.0);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw Error("spearman_rho: length mismatch (" + std::to_string(xs.size()) + " vs " +
                std::to_string(ys.size()) + ")");
  }
  if (xs.size() < 2) return 0.0;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

CandidateMode parse_candidate_mode(std::string_view name) {
  if (name == "random") return CandidateMode::Random;
  if (name == "recalled") return CandidateMode::Recalled;
  throw ConfigError("unknown candidate mode '" + std::string(name) +
                    "' (expected random or recalled)");
}

std::string_view candidate_mode_name(CandidateMode mode) {
  return mode == CandidateMode::Random ? "random" : "recalled";
}

void validate_pipeline(const RankingPipeline& p) {
  if (!p.llm) throw Error("ranking pipeline has no LLM");
  if (p.k == 0) throw Error("candidate set size must be >= 1");
  if (p.mode == CandidateMode::Random && !p.item_pool) {
    throw Error("random candidates need an item pool");
  }
  if (p.mode == CandidateMode::Recalled && !p.model) {
    throw Error("recalled candidates need a fitted baseline model");
  }
  if (p.prompt.scheme.kind == candidates::SchemeKind::TokenLetters && p.k > 26) {
    throw Error("letter identifiers support at most 26 candidates, got " + std::to_string(p.k));
  }
  if (!p.interest.catalog) throw Error("ranking pipeline has no catalog");
  if (interest::form_needs_personal_memory(p.form, p.interest.retrieval_memory) &&
      !p.interest.personal) {
    throw Error("interest form " + std::to_string(static_cast<int>(p.form)) +
                " requires a personalized memory");
  }
  if (p.prompt.icl == prompting::IclMode::Others && !p.interest.embedder) {
    throw Error("icl=others requires an embedder");
  }
  if (p.parallelism < 1) throw Error("parallelism must be >= 1");
}

Aggregate aggregate_rows(const std::vector<MetricsRow>& rows) {
  Aggregate a;
  if (rows.empty()) return a;
  for (const auto& r : rows) {
    a.coverage += r.covered ? 1.0 : 0.0;
    a.ndcg1 += r.ndcg1;
    a.ndcg10 += r.ndcg10;
    a.ndcg20 += r.ndcg20;
    a.inference_time_s += r.latency_s;
    if (r.failed) ++a.failures;
  }
  const double n = static_cast<double>(rows.size());
  a.coverage /= n;
  a.ndcg1 /= n;
  a.ndcg10 /= n;
  a.ndcg20 /= n;
  a.inference_time_s /= n;
  return a;
}

Aggregate mean_of(const std::vector<Aggregate>& per_repeat) {
  Aggregate a;
  if (per_repeat.empty()) return a;
  for (const auto& r : per_repeat) {
    a.coverage += r.coverage;
    a.ndcg1 += r.ndcg1;
    a.ndcg10 += r.ndcg10;
    a.ndcg20 += r.ndcg20;
    a.inference_time_s += r.inference_time_s;
    a.failures += r.failures;
  }
  const double n = static_cast<double>(per_repeat.size());
  a.coverage /= n;
  a.ndcg1 /= n;
  a.ndcg10 /= n;
  a.ndcg20 /= n;
  a.inference_time_s /= n;
  return a;
}

namespace {

ojson aggregate_json(const Aggregate& a) {
  ojson j;
  j["coverage"] = a.coverage;
  j["ndcg@1"] = a.ndcg1;
  j["ndcg@10"] = a.ndcg10;
  j["ndcg@20"] = a.ndcg20;
  j["failures"] = a.failures;
  return j;
}

// Interest profile and demonstration of one instance, shared by all repeats.
struct Prepared {
  std::optional<interest::InterestProfile> profile;
  std::optional<prompting::Demonstration> demo;
  std::string error;
};

std::vector<Prepared> prepare(const std::vector<corpus::EvalInstance>& instances,
                              const RankingPipeline& p) {
  std::vector<Prepared> out(instances.size());
  const auto& pool = p.demo_pool ? *p.demo_pool : instances;
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(dynamic) num_threads(p.parallelism)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& slot = out[static_cast<std::size_t>(i)];
    const auto& inst = instances[static_cast<std::size_t>(i)];
    try {
      slot.profile = interest::render_interest(p.form, inst, p.interest);
      if (p.prompt.icl != prompting::IclMode::None) {
        slot.demo = prompting::select_demonstration(p.prompt.icl, inst, pool, *p.interest.catalog,
                                                    p.interest.embedder, p.prompt.history_len);
      }
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }
  return out;
}

candidates::CandidateSet build_set(const corpus::EvalInstance& inst, const RankingPipeline& p,
                                   std::uint64_t seed) {
  if (p.mode == CandidateMode::Random) {
    return candidates::build_random_candidates(inst, *p.item_pool, p.k, seed);
  }
  auto set = candidates::build_recalled_candidates(*p.model, inst, p.k);
  set.seed = seed;
  return set;
}

// Render, call (one or two turns) and ground one presented candidate list.
MetricsRow rank_once(const corpus::EvalInstance& inst, const Prepared& prep,
                     const candidates::CandidateSet& set, const RankingPipeline& p,
                     const std::string& instance_id) {
  MetricsRow row;
  row.user_id = inst.user_id;
  row.gt_index = set.ground_truth_index;
  if (!prep.profile) {
    row.failed = true;
    row.error = prep.error;
    return row;
  }
  try {
    const auto rendered =
        candidates::render_identifiers(set, *p.interest.catalog, p.prompt.scheme);
    auto prompt = prompting::render_ranking_prompt(*prep.profile, rendered, p.prompt, prep.demo,
                                                   instance_id);
    llm::OracleHint hint;
    hint.ground_truth_index = set.ground_truth_index;
    const auto start = std::chrono::steady_clock::now();
    std::string answer;
    if (prompt.user_turns.size() == 2) {
      const auto stage1 = p.llm->complete(prompt.messages(0), hint);
      ++row.llm_calls;
      prompt.user_turns[1] = prompting::fill_stage_one(prompt.user_turns[1], stage1);
      answer = p.llm->complete(prompt.messages(1), hint);
    } else {
      answer = p.llm->complete(prompt.messages(0), hint);
    }
    ++row.llm_calls;
    row.latency_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto report = candidates::ground_output(answer, rendered, set.ground_truth_index);
    row.raw_output = std::move(answer);
    row.covered = report.covered;
    row.unmatched_lines = report.unmatched_lines.size();
    row.duplicates_dropped = report.duplicates_dropped;
    if (report.covered) {
      const auto it =
          std::find(report.ranking.begin(), report.ranking.end(), *set.ground_truth_index);
      row.gt_rank = static_cast<std::size_t>(it - report.ranking.begin()) + 1;
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.covered = false;
    row.error = e.what();
  }
  row.ndcg1 = ndcg_at_k(row.gt_rank, 1);
  row.ndcg10 = ndcg_at_k(row.gt_rank, 10);
  row.ndcg20 = ndcg_at_k(row.gt_rank, 20);
  return row;
}

}  // namespace

MetricsReport run_ranking_eval(const std::vector<corpus::EvalInstance>& instances,
                               const RankingPipeline& pipeline,
                               const std::vector<std::uint64_t>& seeds,
                               const std::string& config_hash) {
  validate_pipeline(pipeline);
  if (seeds.empty()) throw Error("run_ranking_eval: at least one repeat seed is required");
  const auto wall_start = std::chrono::steady_clock::now();

  MetricsReport report;
  report.config_hash = config_hash;
  report.seeds = seeds;
  const auto prepared = prepare(instances, pipeline);
  for (const auto& prep : prepared) {
    if (prep.profile) report.interest_llm_calls += prep.profile->llm_calls;
  }

  for (std::size_t r = 0; r < seeds.size(); ++r) {
    std::vector<MetricsRow> rows(instances.size());
    const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(dynamic) num_threads(pipeline.parallelism)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const auto& inst = instances[idx];
      const std::string id = inst.user_id + "#r" + std::to_string(r);
      try {
        const auto set = build_set(inst, pipeline, mix_seed(seeds[r], idx));
        rows[idx] = rank_once(inst, prepared[idx], set, pipeline, id);
      } catch (const std::exception& e) {
        rows[idx] = MetricsRow{};
        rows[idx].user_id = inst.user_id;
        rows[idx].failed = true;
        rows[idx].error = e.what();
      }
    }
    for (const auto& row : rows) report.ranking_llm_calls += row.llm_calls;
    report.per_repeat.push_back(aggregate_rows(rows));
    report.rows.push_back(std::move(rows));
  }
  report.aggregate = mean_of(report.per_repeat);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

std::string MetricsReport::to_json() const {
  ojson j;
  j["config_hash"] = config_hash;
  j["repeats"] = seeds.size();
  j["seeds"] = seeds;
  j["aggregate"] = aggregate_json(aggregate);
  ojson reps = ojson::array();
  for (std::size_t r = 0; r < per_repeat.size(); ++r) {
    ojson rep;
    rep["seed"] = seeds[r];
    rep["aggregate"] = aggregate_json(per_repeat[r]);
    ojson rs = ojson::array();
    for (const auto& row : rows[r]) {
      ojson o;
      o["user_id"] = row.user_id;
      o["covered"] = row.covered;
      o["gt_rank"] = row.gt_rank ? ojson(*row.gt_rank) : ojson(nullptr);
      o["gt_index"] = row.gt_index ? ojson(*row.gt_index) : ojson(nullptr);
      o["ndcg@1"] = row.ndcg1;
      o["ndcg@10"] = row.ndcg10;
      o["ndcg@20"] = row.ndcg20;
      o["unmatched_lines"] = row.unmatched_lines;
      o["duplicates_dropped"] = row.duplicates_dropped;
      o["failed"] = row.failed;
      if (row.failed) o["error"] = row.error;
      rs.push_back(std::move(o));
    }
    rep["rows"] = std::move(rs);
    reps.push_back(std::move(rep));
  }
  j["per_repeat"] = std::move(reps);
  j["llm_calls"] = {{"interest", interest_llm_calls}, {"ranking", ranking_llm_calls}};
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_csv(bool with_timing) const {
  std::string out = "scope,coverage,ndcg@1,ndcg@10,ndcg@20,inference_time_s\n";
  auto line = [&](const std::string& scope, const Aggregate& a) {
    out += scope + "," + fmt(a.coverage) + "," + fmt(a.ndcg1) + "," + fmt(a.ndcg10) + "," +
           fmt(a.ndcg20) + "," + (with_timing ? fmt(a.inference_time_s) : "NA") + "\n";
  };
  for (std::size_t r = 0; r < per_repeat.size(); ++r) line("repeat" + std::to_string(r + 1), per_repeat[r]);
  line("mean", aggregate);
  return out;
}

std::string MetricsReport::timing_json() const {
  ojson j;
  j["wall_time_s"] = wall_time_s;
  j["mean_inference_time_s"] = aggregate.inference_time_s;
  ojson reps = ojson::array();
  for (const auto& a : per_repeat) reps.push_back(a.inference_time_s);
  j["per_repeat_inference_time_s"] = std::move(reps);
  return j.dump(2) + "\n";
}

std::string MetricsReport::outputs_jsonl() const {
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& row : rows[r]) {
      ojson o;
      o["repeat"] = r;
      o["user_id"] = row.user_id;
      o["output"] = row.raw_output;
      out += o.dump() + "\n";
    }
  }
  return out;
}

std::string BiasProbeResult::to_json() const {
  ojson j;
  j["permutations"] = permutations;
  j["spearman_rho"] = spearman_rho;
  j["pairs_count"] = pairs.size();
  j["uncovered"] = uncovered;
  j["failed"] = failed;
  j["skipped_instances"] = skipped_instances;
  ojson ps = ojson::array();
  for (const auto& p : pairs) {
    ps.push_back({{"user_id", p.user_id},
                  {"trial", p.trial},
                  {"input_position", p.input_position},
                  {"output_rank", p.output_rank}});
  }
  j["pairs"] = std::move(ps);
  return j.dump(2) + "\n";
}

BiasProbeResult position_bias_probe(const std::vector<corpus::EvalInstance>& instances,
                                    const RankingPipeline& pipeline, std::size_t permutations,
                                    std::uint64_t seed) {
  validate_pipeline(pipeline);
  if (permutations < 2) throw Error("position bias probe needs at least 2 permutations");
  const auto prepared = prepare(instances, pipeline);

  struct Trial {
    std::optional<BiasPair> pair;
    bool failed = false;
    bool skipped = false;
  };
  std::vector<std::vector<Trial>> trials(instances.size());
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(dynamic) num_threads(pipeline.parallelism)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& inst = instances[idx];
    auto& out = trials[idx];
    candidates::CandidateSet base;
    try {
      base = build_set(inst, pipeline, mix_seed(seed, idx));
    } catch (const std::exception&) {
      out.push_back({std::nullopt, true, false});
      continue;
    }
    if (!base.ground_truth_index) {
      out.push_back({std::nullopt, false, true});
      continue;
    }
    for (std::size_t t = 0; t < permutations; ++t) {
      candidates::CandidateSet set = base;
      Rng rng(mix_seed(mix_seed(seed, idx), t + 1));
      rng.shuffle(set.items);
      const auto gt = std::find(set.items.begin(), set.items.end(), inst.ground_truth);
      set.ground_truth_index = static_cast<std::size_t>(gt - set.items.begin());
      const auto row = rank_once(inst, prepared[idx], set, pipeline,
                                 inst.user_id + "#p" + std::to_string(t));
      Trial tr;
      tr.failed = row.failed;
      if (row.gt_rank) {
        tr.pair = BiasPair{inst.user_id, t, *set.ground_truth_index + 1, *row.gt_rank};
      }
      out.push_back(std::move(tr));
    }
  }

  BiasProbeResult result;
  result.permutations = permutations;
  std::vector<double> xs, ys;
  for (const auto& per : trials) {
    for (const auto& tr : per) {
      if (tr.skipped) {
        ++result.skipped_instances;
      } else if (tr.failed) {
        ++result.failed;
      } else if (!tr.pair) {
        ++result.uncovered;
      } else {
        xs.push_back(static_cast<double>(tr.pair->input_position));
        ys.push_back(static_cast<double>(tr.pair->output_rank));
        result.pairs.push_back(*tr.pair);
      }
    }
  }
  result.spearman_rho = xs.size() >= 2 ? spearman_rho(xs, ys) : 0.0;
  return result;
}

}  // namespace recharness::evaluator
