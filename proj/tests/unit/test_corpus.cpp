#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "recharness/corpus.hpp"
#include "test_support.hpp"

using namespace recharness;
using namespace recharness::corpus;

namespace {

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

}  // namespace

TEST(Corpus, ParseMovieLensRating) {
  const auto it = parse_movielens_rating("1::1193::5::978300760", 1);
  EXPECT_EQ(it.user_id, "1");
  EXPECT_EQ(it.item_id, "1193");
  EXPECT_EQ(*it.rating, 5.0);
  EXPECT_EQ(it.timestamp, 978300760);
  EXPECT_THROW(parse_movielens_rating("1::2::3", 4), Error);
  EXPECT_THROW(parse_movielens_rating("1::2::7::100", 4), Error);
  try {
    parse_movielens_rating("1::x", 17);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST(Corpus, ParseMovieLensMovie) {
  const auto m = parse_movielens_movie("1::Toy Story (1995)::Animation|Children's|Comedy", 1);
  EXPECT_EQ(m.title, "Toy Story (1995)");
  ASSERT_NE(m.attribute("year"), nullptr);
  EXPECT_EQ(*m.attribute("year"), "1995");
  EXPECT_EQ(*m.attribute("genre"), "Animation, Children's, Comedy");
}

TEST(Corpus, LoadsMovieLensFixture) {
  const auto ratings = rh_test::data_path("fixtures/ml_tiny/ratings.dat");
  const auto movies = rh_test::data_path("fixtures/ml_tiny/movies.dat");
  const auto r = load_movielens(ratings, movies);
  EXPECT_EQ(r.interactions.size(), count_lines(ratings));
  EXPECT_EQ(r.catalog.size(), count_lines(movies));
  EXPECT_EQ(r.catalog.at("61").title, "Am\xc3\xa9lie (2001)");
}

TEST(Corpus, LoadsAmazonFixture) {
  const auto r = load_amazon_books(rh_test::data_path("fixtures/books_tiny/reviews.jsonl"),
                                   rh_test::data_path("fixtures/books_tiny/meta.jsonl"));
  EXPECT_EQ(r.catalog.size(), 20u);           // no-description item dropped
  EXPECT_EQ(r.catalog.at("B0001").title, "Lanterns at Dusk");  // first duplicate kept
  EXPECT_FALSE(r.warnings.empty());
  for (const auto& it : r.interactions) EXPECT_NE(it.item_id, "B9999");
  EXPECT_EQ(r.interactions.size(),
            count_lines(rh_test::data_path("fixtures/books_tiny/reviews.jsonl")) - 1);
  EXPECT_TRUE(r.catalog.at("B0003").description.has_value());
}

TEST(Corpus, KCoreMatchesBruteForceFixedPoint) {
  Rng rng(9);
  std::vector<Interaction> events;
  for (int u = 0; u < 40; ++u) {
    const auto n = 1 + rng.uniform_index(8);
    for (std::size_t k = 0; k < n; ++k) {
      events.push_back({"u" + std::to_string(u), "i" + std::to_string(rng.uniform_index(25)),
                        3.0, static_cast<std::int64_t>(k)});
    }
  }
  // Oracle: remove offending users/items one round at a time until stable.
  std::vector<Interaction> oracle = events;
  for (;;) {
    std::map<std::string, int> uc, ic;
    for (const auto& e : oracle) ++uc[e.user_id], ++ic[e.item_id];
    std::vector<Interaction> next;
    for (const auto& e : oracle) {
      if (uc[e.user_id] >= 3 && ic[e.item_id] >= 3) next.push_back(e);
    }
    if (next.size() == oracle.size()) break;
    oracle = next;
  }
  EXPECT_EQ(filter_k_core(events, 3, 3), oracle);
}

TEST(Corpus, SortHistoryTiesAndDuplicates) {
  std::vector<Interaction> ev = {{"u", "b", 1.0, 5}, {"u", "a", 2.0, 5}, {"u", "c", 3.0, 1},
                                 {"u", "a", 4.0, 5}};
  const auto s = sort_history(ev);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].item_id, "c");
  EXPECT_EQ(s[1].item_id, "a");
  EXPECT_EQ(*s[1].rating, 2.0);
  EXPECT_EQ(s[2].item_id, "b");
}

TEST(Corpus, LeaveOneOut) {
  UserHistory h{"u", {{"u", "a", 1.0, 1}, {"u", "b", 1.0, 2}, {"u", "c", 1.0, 3}}};
  const auto inst = leave_one_out(h);
  EXPECT_EQ(inst.ground_truth, "c");
  ASSERT_EQ(inst.prefix.size(), 2u);
  EXPECT_EQ(inst.prefix[1].item_id, "b");
}

TEST(Corpus, SampleUsersReproducibleAndEligible) {
  const auto r = load_movielens(rh_test::data_path("fixtures/ml_tiny/ratings.dat"),
                                rh_test::data_path("fixtures/ml_tiny/movies.dat"));
  const auto h = build_histories(r.interactions);
  const auto a = sample_users(h, 10, 5, 15);
  const auto b = sample_users(h, 10, 5, 15);
  ASSERT_EQ(a.size(), 10u);
  std::set<std::string> users;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].user_id, b[i].user_id);
    EXPECT_GE(a[i].prefix.size() + 1, 15u);
    users.insert(a[i].user_id);
  }
  EXPECT_EQ(users.size(), 10u);
  const auto c = sample_users(h, 10, 6, 15);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].user_id != c[i].user_id;
  EXPECT_TRUE(differs);
  EXPECT_THROW(sample_users(h, 31, 5, 2), Error);
}

TEST(Corpus, CtrSplitSizesAndLabels) {
  std::vector<Interaction> ev;
  Rng rng(4);
  for (int i = 0; i < 10500; ++i) {
    ev.push_back({"u" + std::to_string(i % 97), "i" + std::to_string(i),
                  static_cast<double>(1 + rng.uniform_index(5)), static_cast<std::int64_t>(i)});
  }
  const auto h = build_histories(ev);
  const auto ds = ctr_split(ev, h, 10000, {8, 1, 1}, 4.0);
  EXPECT_EQ(ds.window_sizes[0], 8000u);
  EXPECT_EQ(ds.window_sizes[1], 1000u);
  EXPECT_EQ(ds.window_sizes[2], 1000u);
  EXPECT_EQ(ds.train.size() + ds.skips.skipped, 8000u);
  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    for (const auto& s : *split) {
      EXPECT_EQ(s.label, *s.target.rating >= 4.0);
      EXPECT_LE(s.context.size(), 10u);
      for (const auto& c : s.context) {
        EXPECT_LT(c.timestamp, s.target.timestamp);
        EXPECT_EQ(c.user_id, s.target.user_id);
      }
    }
  }
}

TEST(Corpus, CtrContextExcludesSameTimestamp) {
  std::vector<Interaction> ev = {{"u", "a", 5.0, 1}, {"u", "b", 5.0, 2}, {"u", "c", 1.0, 2}};
  const auto ds = ctr_split(ev, build_histories(ev), 3, {1, 1, 1}, 4.0);
  // "c" shares b's timestamp, so only "a" precedes it.
  ASSERT_EQ(ds.test.size(), 1u);
  EXPECT_EQ(ds.test[0].target.item_id, "c");
  ASSERT_EQ(ds.test[0].context.size(), 1u);
  EXPECT_EQ(ds.test[0].context[0].item_id, "a");
  EXPECT_EQ(ds.skips.skipped, 1u);  // "a" has no history
}

TEST(Corpus, DefaultThresholds) {
  EXPECT_EQ(default_ctr_threshold("movielens"), 4.0);
  EXPECT_EQ(default_ctr_threshold("amazon_books"), 5.0);
}

TEST(Corpus, JsonlRoundTrip) {
  std::vector<Interaction> ev = {{"u1", "i1", 4.5, 10}, {"u2", "i2", std::nullopt, 11}};
  EXPECT_EQ(interactions_from_jsonl(interactions_to_jsonl(ev)), ev);
  auto cat = rh_test::synthetic_catalog(5);
  cat["i1"].description = "desc";
  EXPECT_EQ(catalog_from_jsonl(catalog_to_jsonl(cat)), cat);
}

TEST(Corpus, HashIgnoresOrder) {
  std::vector<Interaction> ev = {{"u1", "i1", 4.0, 10}, {"u2", "i2", 3.0, 11}};
  auto rev = ev;
  std::reverse(rev.begin(), rev.end());
  const auto cat = rh_test::synthetic_catalog(3);
  EXPECT_EQ(corpus_hash(ev, cat), corpus_hash(rev, cat));
  ev[0].rating = 5.0;
  EXPECT_NE(corpus_hash(ev, cat), corpus_hash(rev, cat));
}
