#include "recharness/ctr.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>

#include "recharness/common.hpp"

namespace recharness::ctr {

using ojson = nlohmann::ordered_json;

const std::vector<CtrSample>& CtrSplits::get(std::string_view split) const {
  if (split == "train") return train;
  if (split == "valid") return valid;
  if (split == "test") return test;
  throw ConfigError("unknown split '" + std::string(split) + "' (expected train, valid, test)");
}

namespace {

std::vector<CtrSample> ordered(std::vector<CtrSample> v) {
  std::stable_sort(v.begin(), v.end(), [](const CtrSample& a, const CtrSample& b) {
    return std::tie(a.target.timestamp, a.target.user_id) <
           std::tie(b.target.timestamp, b.target.user_id);
  });
  return v;
}

}  // namespace

CtrSplits build_ctr_samples(const corpus::CtrDataset& dataset) {
  return {ordered(dataset.train), ordered(dataset.valid), ordered(dataset.test)};
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Positive: return "positive";
    case Verdict::Negative: return "negative";
    case Verdict::Unparseable: return "unparseable";
  }
  return "unparseable";
}

namespace {

std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c)) && static_cast<unsigned char>(c) < 0x80) {
      cur += c;
    } else if (c == '\'' && !cur.empty()) {
      cur += c;  // keep contractions whole ("don't")
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

CtrAnswer parse_ctr_answer(std::string_view raw_text) {
  CtrAnswer answer;
  answer.raw = std::string(raw_text);
  std::string s = to_lower_ascii(trim(raw_text));
  std::erase_if(s, [](char c) { return c == '*' || c == '`' || c == '"' || c == '#'; });
  s = trim(s);
  while (!s.empty() && (s.front() == '\'' || s.front() == '_')) s = trim(s.substr(1));
  const auto lines = split_lines(s);
  if (lines.empty()) return answer;
  std::string first_line;
  for (const auto& l : lines) {
    if (!trim(l).empty()) {
      first_line = trim(l);
      break;
    }
  }
  const auto words = words_of(first_line);
  if (words.empty()) return answer;
  if (words.front() == "yes") {
    answer.verdict = Verdict::Positive;
    return answer;
  }
  if (words.front() == "no") {
    answer.verdict = Verdict::Negative;
    return answer;
  }
  const bool yes = std::find(words.begin(), words.end(), "yes") != words.end();
  const bool no = std::find(words.begin(), words.end(), "no") != words.end();
  if (yes != no) answer.verdict = yes ? Verdict::Positive : Verdict::Negative;
  return answer;
}

CtrReport run_ctr_eval(const std::vector<CtrSample>& samples, llm::LanguageModel& llm,
                       prompting::CtrStyle style, const CtrEvalOptions& options) {
  if (samples.empty()) throw Error("run_ctr_eval: no samples");
  if (!options.catalog) throw Error("run_ctr_eval: catalog missing");
  struct Outcome {
    Verdict verdict = Verdict::Unparseable;
    std::string error;
  };
  std::vector<Outcome> outcomes(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.parallelism))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto& out = outcomes[static_cast<std::size_t>(i)];
    try {
      const auto prompt = prompting::render_ctr_prompt(s, style, *options.catalog, options.vocab,
                                                       options.threshold);
      llm::OracleHint hint;
      hint.label = s.label;
      out.verdict = parse_ctr_answer(llm.complete(prompt.messages(0), hint)).verdict;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }
  CtrReport r;
  r.style = style;
  r.total = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& o = outcomes[i];
    if (samples[i].label) ++r.positives;
    if (!o.error.empty()) {
      ++r.failures;
      ++r.unparseable;
      r.errors.push_back(samples[i].target.user_id + ": " + o.error);
      continue;
    }
    if (o.verdict == Verdict::Unparseable) {
      ++r.unparseable;
      continue;
    }
    if ((o.verdict == Verdict::Positive) == samples[i].label) ++r.correct;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

std::string ctr_reports_json(const std::vector<CtrReport>& reports) {
  ojson j = ojson::array();
  for (const auto& r : reports) {
    ojson o;
    o["style"] = prompting::ctr_style_name(r.style);
    o["total"] = r.total;
    o["correct"] = r.correct;
    o["accuracy"] = r.accuracy;
    o["unparseable"] = r.unparseable;
    o["failures"] = r.failures;
    o["positive_rate"] =
        r.total ? static_cast<double>(r.positives) / static_cast<double>(r.total) : 0.0;
    o["errors"] = r.errors;
    j.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

FinetuneRecord finetune_record(const CtrSample& sample, prompting::CtrStyle style,
                               const CtrEvalOptions& options) {
  if (!options.catalog) throw Error("finetune_record: catalog missing");
  const auto parts = prompting::render_ctr_parts(sample, style, *options.catalog, options.vocab,
                                                 options.threshold);
  return {parts.instruction, parts.input, sample.label ? "Yes." : "No."};
}

std::string export_finetune_jsonl(const std::vector<CtrSample>& samples,
                                  prompting::CtrStyle style, const CtrEvalOptions& options) {
  std::string out;
  for (const auto& s : samples) {
    const auto rec = finetune_record(s, style, options);
    ojson j;
    j["instruction"] = rec.instruction;
    j["input"] = rec.input;
    j["output"] = rec.output;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<FinetuneRecord> read_finetune_jsonl(const std::string& text) {
  std::vector<FinetuneRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("instruction").get<std::string>(), j.at("input").get<std::string>(),
                     j.at("output").get<std::string>()});
      if (out.back().output != "Yes." && out.back().output != "No.") {
        throw Error("fine-tune line " + std::to_string(line_no) + ": output must be \"Yes.\" or \"No.\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("fine-tune line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string ExportManifest::to_json() const {
  ojson j;
  j["split"] = split;
  j["style"] = prompting::ctr_style_name(style);
  j["threshold"] = threshold;
  j["corpus_hash"] = corpus_hash;
  j["config_hash"] = config_hash;
  j["records"] = records;
  j["positives"] = positives;
  j["missing_rating_records"] = missing_rating_records;
  j["window_sizes"] = {{"train", window_sizes[0]}, {"valid", window_sizes[1]},
                       {"test", window_sizes[2]}};
  j["split_counts"] = {{"train", split_counts[0]}, {"valid", split_counts[1]},
                       {"test", split_counts[2]}};
  j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

}  // namespace recharness::ctr
