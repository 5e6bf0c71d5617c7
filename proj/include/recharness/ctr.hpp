#pragma once

#include <string>
#include <vector>

#include "recharness/corpus.hpp"
#include "recharness/llm.hpp"
#include "recharness/prompting.hpp"
#include "recharness/templates.hpp"

namespace recharness::ctr {

using CtrSample = corpus::CtrSelection;

struct CtrSplits {
  std::vector<CtrSample> train;
  std::vector<CtrSample> valid;
  std::vector<CtrSample> test;

  const std::vector<CtrSample>& get(std::string_view split) const;
};

/// Samples of each split ordered by target timestamp, then user_id.
CtrSplits build_ctr_samples(const corpus::CtrDataset& dataset);

enum class Verdict { Positive, Negative, Unparseable };

std::string_view verdict_name(Verdict v);

struct CtrAnswer {
  Verdict verdict = Verdict::Unparseable;
  std::string raw;
};

/// First word yes/no decides; otherwise exactly one of the two words standing
/// alone on the first line; otherwise unparseable.
CtrAnswer parse_ctr_answer(std::string_view raw_text);

struct CtrReport {
  prompting::CtrStyle style = prompting::CtrStyle::Implicit;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;  // includes failures
  std::size_t failures = 0;     // LLM errors
  std::size_t positives = 0;    // positive labels
  double accuracy = 0.0;
  std::vector<std::string> errors;
};

struct CtrEvalOptions {
  const corpus::Catalog* catalog = nullptr;
  templates::Vocabulary vocab = templates::Vocabulary::for_domain(templates::Domain::Movie);
  double threshold = 4.0;
  int parallelism = 1;
};

/// Unparseable and failed answers count as incorrect.
CtrReport run_ctr_eval(const std::vector<CtrSample>& samples, llm::LanguageModel& llm,
                       prompting::CtrStyle style, const CtrEvalOptions& options);

/// Accuracy report over styles (one entry per style).
std::string ctr_reports_json(const std::vector<CtrReport>& reports);

struct FinetuneRecord {
  std::string instruction;
  std::string input;
  std::string output;  // "Yes." or "No."

  bool operator==(const FinetuneRecord&) const = default;
};

FinetuneRecord finetune_record(const CtrSample& sample, prompting::CtrStyle style,
                               const CtrEvalOptions& options);

std::string export_finetune_jsonl(const std::vector<CtrSample>& samples,
                                  prompting::CtrStyle style, const CtrEvalOptions& options);
std::vector<FinetuneRecord> read_finetune_jsonl(const std::string& text);

struct ExportManifest {
  std::string split;
  prompting::CtrStyle style = prompting::CtrStyle::Implicit;
  double threshold = 4.0;
  std::string corpus_hash;
  std::string config_hash;
  std::size_t records = 0;
  std::size_t positives = 0;
  std::size_t missing_rating_records = 0;
  std::array<std::size_t, 3> window_sizes{};
  std::array<std::size_t, 3> split_counts{};
  std::size_t skipped = 0;

  std::string to_json() const;
};

}  // namespace recharness::ctr
