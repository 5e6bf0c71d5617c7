#include <gtest/gtest.h>

#include <json.hpp>

#include "recharness/ctr.hpp"
#include "test_support.hpp"

using namespace recharness;
using namespace recharness::ctr;

namespace {

struct CtrFixture {
  corpus::LoadResult data;
  corpus::CtrDataset dataset;
  CtrSplits splits;
  CtrEvalOptions options;

  CtrFixture()
      : data(corpus::load_movielens(rh_test::data_path("fixtures/ml_tiny/ratings.dat"),
                                    rh_test::data_path("fixtures/ml_tiny/movies.dat"))) {
    dataset = corpus::ctr_split(data.interactions, corpus::build_histories(data.interactions),
                                400, {8, 1, 1}, 4.0);
    splits = build_ctr_samples(dataset);
    options.catalog = &data.catalog;
  }
};

/// Balanced synthetic samples, each with a distinct target; the catalog needs
/// at least n + 50 items.
std::vector<CtrSample> balanced_samples(std::size_t n) {
  std::vector<CtrSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    CtrSample s;
    const std::string user = "u" + std::to_string(i);
    s.context = {{user, rh_test::item_id(i % 50), 5.0, 1}, {user, rh_test::item_id((i + 7) % 50), 2.0, 2}};
    s.target = {user, rh_test::item_id(50 + i), i % 2 ? 5.0 : 1.0, 3};
    s.label = i % 2 == 1;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(CtrAnswers, Parsing) {
  EXPECT_EQ(parse_ctr_answer("Yes.").verdict, Verdict::Positive);
  EXPECT_EQ(parse_ctr_answer("  no").verdict, Verdict::Negative);
  EXPECT_EQ(parse_ctr_answer("**Yes**, because...").verdict, Verdict::Positive);
  EXPECT_EQ(parse_ctr_answer("\"No.\"").verdict, Verdict::Negative);
  EXPECT_EQ(parse_ctr_answer("Answer: yes").verdict, Verdict::Positive);
  EXPECT_EQ(parse_ctr_answer("I think the answer is No.\nYes maybe").verdict, Verdict::Negative);
  EXPECT_EQ(parse_ctr_answer("Yes or no, hard to say").verdict, Verdict::Positive);
  EXPECT_EQ(parse_ctr_answer("Hard to say: yes or no").verdict, Verdict::Unparseable);
  EXPECT_EQ(parse_ctr_answer("Yesterday").verdict, Verdict::Unparseable);
  EXPECT_EQ(parse_ctr_answer("").verdict, Verdict::Unparseable);
  EXPECT_EQ(verdict_name(Verdict::Unparseable), "unparseable");
}

TEST(CtrEval, SamplesAreSortedWithinSplits) {
  CtrFixture f;
  for (const char* name : {"train", "valid", "test"}) {
    const auto& s = f.splits.get(name);
    for (std::size_t i = 1; i < s.size(); ++i) {
      EXPECT_LE(std::tie(s[i - 1].target.timestamp, s[i - 1].target.user_id),
                std::tie(s[i].target.timestamp, s[i].target.user_id));
    }
  }
  EXPECT_THROW(f.splits.get("holdout"), Error);
}

TEST(CtrEval, DegenerateClassifiers) {
  CtrFixture f;
  const auto& test = f.splits.train;
  ASSERT_FALSE(test.empty());
  std::size_t pos = 0;
  for (const auto& s : test) pos += s.label;
  auto yes = llm::make_mock(llm::MockKind::ConstantAnswer, {0, 0, "Yes."});
  auto r = run_ctr_eval(test, *yes, prompting::CtrStyle::Implicit, f.options);
  EXPECT_EQ(r.positives, pos);
  EXPECT_EQ(r.accuracy, static_cast<double>(pos) / static_cast<double>(test.size()));
  auto oracle = llm::make_mock(llm::MockKind::Oracle);
  EXPECT_EQ(run_ctr_eval(test, *oracle, prompting::CtrStyle::Hybrid, f.options).accuracy, 1.0);
  auto echo = llm::make_mock(llm::MockKind::Echo);
  auto er = run_ctr_eval(test, *echo, prompting::CtrStyle::Explicit, f.options);
  EXPECT_EQ(er.unparseable, test.size());
  EXPECT_EQ(er.accuracy, 0.0);
}

TEST(CtrEval, RandomAnswersNearHalf) {
  const auto cat = rh_test::synthetic_catalog(2050);
  const auto samples = balanced_samples(2000);
  CtrEvalOptions opts;
  opts.catalog = &cat;
  opts.parallelism = 4;
  auto random = llm::make_mock(llm::MockKind::Random, {31, 0, ""});
  auto r = run_ctr_eval(samples, *random, prompting::CtrStyle::Cot, opts);
  EXPECT_NEAR(r.accuracy, 0.5, 0.04);
  EXPECT_EQ(r.unparseable, 0u);
  opts.parallelism = 1;
  EXPECT_EQ(run_ctr_eval(samples, *random, prompting::CtrStyle::Cot, opts).correct, r.correct);
}

TEST(CtrEval, ReportsJson) {
  CtrReport a;
  a.total = 10;
  a.correct = 6;
  a.accuracy = 0.6;
  CtrReport b = a;
  b.style = prompting::CtrStyle::Cot;
  const auto j = nlohmann::json::parse(ctr_reports_json({a, b}));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["style"], "cot");
  EXPECT_EQ(j[0]["accuracy"], 0.6);
}

TEST(FinetuneExport, RecordsRoundTrip) {
  CtrFixture f;
  const auto text = export_finetune_jsonl(f.splits.train, prompting::CtrStyle::Implicit, f.options);
  const auto records = read_finetune_jsonl(text);
  ASSERT_EQ(records.size(), f.splits.train.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i], finetune_record(f.splits.train[i], prompting::CtrStyle::Implicit, f.options));
    EXPECT_EQ(records[i].output, f.splits.train[i].label ? "Yes." : "No.");
    EXPECT_NE(records[i].instruction.find("answering \"Yes.\" or \"No.\""), std::string::npos);
  }
  EXPECT_THROW(read_finetune_jsonl("{\"instruction\":\"x\",\"input\":\"y\",\"output\":\"Maybe\"}\n"),
               Error);
  EXPECT_THROW(read_finetune_jsonl("{\"instruction\":\"x\"}\n"), Error);
}

TEST(FinetuneExport, SinglePositiveImplicit) {
  corpus::Catalog cat = rh_test::synthetic_catalog(3);
  CtrSample s;
  s.context = {{"u", "i0", 5.0, 1}};
  s.target = {"u", "i1", 4.0, 2};
  s.label = true;
  CtrEvalOptions opts;
  opts.catalog = &cat;
  const auto line = split_lines(export_finetune_jsonl({s}, prompting::CtrStyle::Implicit, opts));
  ASSERT_EQ(line.size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(line[0])["output"], "Yes.");
}

TEST(FinetuneExport, ThresholdsMatchBruteForceRelabeling) {
  CtrFixture ml;
  std::map<std::tuple<std::string, std::string, std::int64_t>, double> rating;
  for (const auto& ev : ml.data.interactions) {
    rating[{ev.user_id, ev.item_id, ev.timestamp}] = *ev.rating;
  }
  for (const auto* split : {&ml.splits.train, &ml.splits.valid, &ml.splits.test}) {
    for (const auto& s : *split) {
      const double r = rating.at({s.target.user_id, s.target.item_id, s.target.timestamp});
      EXPECT_EQ(s.label, r >= 4.0);
    }
  }
  auto books = corpus::load_amazon_books(rh_test::data_path("fixtures/books_tiny/reviews.jsonl"),
                                         rh_test::data_path("fixtures/books_tiny/meta.jsonl"));
  const double t = corpus::default_ctr_threshold("amazon_books");
  EXPECT_EQ(t, 5.0);
  auto ds = corpus::ctr_split(books.interactions, corpus::build_histories(books.interactions),
                              books.interactions.size(), {8, 1, 1}, t);
  std::size_t checked = 0;
  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    for (const auto& s : *split) {
      EXPECT_EQ(s.label, *s.target.rating >= 5.0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 50u);
}

TEST(FinetuneExport, ManifestJson) {
  ExportManifest m;
  m.split = "train";
  m.records = 8;
  m.window_sizes = {8, 1, 1};
  const auto j = nlohmann::json::parse(m.to_json());
  EXPECT_EQ(j["split"], "train");
  EXPECT_EQ(j["style"], "implicit");
  EXPECT_EQ(j["records"], 8);
}
