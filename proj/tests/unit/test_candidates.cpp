#include <gtest/gtest.h>

#include <set>

#include "grounding_fuzz.hpp"
#include "recharness/candidates.hpp"
#include "recharness/llm.hpp"
#include "test_support.hpp"

using namespace recharness;
using namespace recharness::candidates;

namespace {

corpus::EvalInstance small_instance() {
  corpus::EvalInstance inst;
  inst.user_id = "u";
  for (std::size_t i = 0; i < 5; ++i) {
    inst.prefix.push_back({"u", rh_test::item_id(i), 3.0, static_cast<std::int64_t>(i)});
  }
  inst.ground_truth = rh_test::item_id(5);
  return inst;
}

std::string echo(const RenderedCandidates& r) {
  auto mock = llm::make_mock(llm::MockKind::Echo);
  const llm::Message m{llm::Role::User,
                       "Now there are " + std::to_string(r.lines.size()) +
                           " candidate movies that I can watch next:\n" + join(r.lines, "\n") +
                           "\n\nRank them."};
  return mock->complete(std::span<const llm::Message>(&m, 1));
}

}  // namespace

TEST(Candidates, RandomSetExcludesHistoryAndContainsTruthOnce) {
  const auto cat = rh_test::synthetic_catalog(100);
  const auto pool = rh_test::catalog_ids(cat);
  const auto inst = small_instance();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto set = build_random_candidates(inst, pool, 20, seed);
    ASSERT_EQ(set.items.size(), 20u);
    ASSERT_TRUE(set.ground_truth_index);
    EXPECT_EQ(set.items[*set.ground_truth_index], inst.ground_truth);
    std::set<std::string> uniq(set.items.begin(), set.items.end());
    EXPECT_EQ(uniq.size(), 20u);
    for (const auto& ev : inst.prefix) EXPECT_FALSE(uniq.count(ev.item_id));
  }
  EXPECT_EQ(build_random_candidates(inst, pool, 20, 9).items,
            build_random_candidates(inst, pool, 20, 9).items);
  EXPECT_NE(build_random_candidates(inst, pool, 20, 9).items,
            build_random_candidates(inst, pool, 20, 10).items);
}

TEST(Candidates, TooSmallPoolReportsCounts) {
  const auto cat = rh_test::synthetic_catalog(15);
  try {
    build_random_candidates(small_instance(), rh_test::catalog_ids(cat), 20, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("9 unseen"), std::string::npos) << e.what();
  }
}

TEST(Candidates, RecalledSetFlagsCoverage) {
  baselines::PopModel pop;
  for (std::size_t i = 0; i < 30; ++i) pop.count[rh_test::item_id(i)] = 100 - i;
  const auto inst = small_instance();
  auto set = build_recalled_candidates(pop, inst, 10);
  ASSERT_EQ(set.items.size(), 10u);
  EXPECT_EQ(set.items.front(), "i5");
  EXPECT_EQ(set.ground_truth_index, 0u);
  auto miss = inst;
  miss.ground_truth = "i29";
  EXPECT_FALSE(build_recalled_candidates(pop, miss, 10).ground_truth_index);
}

TEST(Candidates, SchemeNames) {
  EXPECT_EQ(parse_scheme("token").kind, SchemeKind::TokenNumeric);
  EXPECT_EQ(parse_scheme("letters").kind, SchemeKind::TokenLetters);
  EXPECT_EQ(scheme_name(parse_scheme("description")), "description");
  EXPECT_THROW(parse_scheme("emoji"), ConfigError);
}

TEST(Candidates, RenderDisambiguatesCollidingTitles) {
  corpus::Catalog cat;
  cat["a"] = {"a", "Heat (1995)", {}, std::nullopt};
  cat["b"] = {"b", "heat", {}, std::nullopt};
  cat["c"] = {"c", "Ronin (1998)", {}, std::nullopt};
  CandidateSet set{{"a", "b", "c"}, 0, 0};
  auto r = render_identifiers(set, cat, parse_scheme("letters"));
  EXPECT_EQ(r.lines[0], "A. Heat (1995) [a]");
  EXPECT_EQ(r.lines[1], "B. heat [b]");
  EXPECT_EQ(r.lines[2], "C. Ronin (1998)");
  CandidateSet big;
  for (std::size_t i = 0; i < 27; ++i) big.items.push_back(rh_test::item_id(i));
  EXPECT_THROW(render_identifiers(big, rh_test::synthetic_catalog(27), parse_scheme("letters")),
               Error);
}

TEST(Grounding, NormalizeAndStrip) {
  EXPECT_EQ(normalize_title("  The Matrix (1999) "), "the matrix");
  EXPECT_EQ(normalize_title("Amélie"), "amélie");
  EXPECT_EQ(normalize_title("Se7en: Director's Cut"), "se7en director s cut");
  EXPECT_EQ(strip_decorations("3. **The Matrix**"), "The Matrix");
  EXPECT_EQ(strip_decorations("- \"Heat\""), "Heat");
  EXPECT_EQ(strip_decorations("(12) Ronin"), "Ronin");
  EXPECT_EQ(strip_decorations("[4] Ronin"), "Ronin");
  EXPECT_EQ(strip_decorations("1 - Ronin"), "Ronin");
  EXPECT_EQ(strip_decorations("2001: A Space Odyssey"), "2001: A Space Odyssey");
}

TEST(Grounding, EchoRoundTripIsIdentity) {
  const auto cat = rh_test::synthetic_catalog(200);
  const auto inst = small_instance();
  for (const char* scheme : {"description", "token-numeric", "token-letters"}) {
    auto set = build_random_candidates(inst, rh_test::catalog_ids(cat), 20, 77);
    auto r = render_identifiers(set, cat, parse_scheme(scheme));
    auto g = ground_output(echo(r), r, set.ground_truth_index);
    std::vector<std::size_t> identity(20);
    for (std::size_t i = 0; i < 20; ++i) identity[i] = i;
    EXPECT_EQ(g.ranking, identity) << scheme;
    EXPECT_TRUE(g.covered);
    EXPECT_TRUE(g.unmatched_lines.empty());
  }
}

TEST(Grounding, TierSelection) {
  corpus::Catalog cat;
  cat["a"] = {"a", "Alien (1979)", {}, std::nullopt};
  cat["b"] = {"b", "Aliens (1986)", {}, std::nullopt};
  cat["c"] = {"c", "Alien Resurrection (1997)", {}, std::nullopt};
  cat["d"] = {"d", "The Good, the Bad and the Ugly (1966)", {}, std::nullopt};
  CandidateSet set{{"a", "b", "c", "d"}, 2, 0};
  auto r = render_identifiers(set, cat, parse_scheme("description"));
  // Exact, then longest containment, then Jaccard.
  auto g = ground_output(
      "1. aliens\n2. I'd pick Alien Resurrection first\n3. Alien\n4. Good the Bad and Ugly",
      r, 2);
  EXPECT_EQ(g.ranking, (std::vector<std::size_t>{1, 2, 0, 3}));
  EXPECT_TRUE(g.covered);
  auto weak = ground_output("Bad Ugly", r, 2);
  EXPECT_TRUE(weak.ranking.empty());
  EXPECT_EQ(weak.unmatched_lines.size(), 1u);
}

TEST(Grounding, DuplicatesAndChatter) {
  const auto cat = rh_test::synthetic_catalog(5);
  CandidateSet set{rh_test::catalog_ids(cat), 4, 0};
  auto r = render_identifiers(set, cat, parse_scheme("description"));
  const std::string out = "Sure! Here you go:\n" + r.display_titles[3] + "\n" +
                          r.display_titles[3] + "\n" + r.display_titles[1] + "\nEnjoy.";
  auto g = ground_output(out, r, 4);
  EXPECT_EQ(g.ranking, (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(g.duplicates_dropped, 1u);
  EXPECT_EQ(g.unmatched_lines.size(), 2u);
  EXPECT_FALSE(g.covered);
  EXPECT_FALSE(ground_output(out, r, std::nullopt).covered);
}

TEST(Grounding, TokenLabelsWithTitleFallback) {
  const auto cat = rh_test::synthetic_catalog(12);
  CandidateSet set{rh_test::catalog_ids(cat), 0, 0};
  auto r = render_identifiers(set, cat, parse_scheme("token-numeric"));
  auto g = ground_output("12\n(3)\n1) whatever\n" + r.display_titles[5], r, 0);
  EXPECT_EQ(g.ranking, (std::vector<std::size_t>{11, 2, 0, 5}));
  auto letters = render_identifiers(set, cat, parse_scheme("token-letters"));
  auto gl = ground_output("b\n**C**. x\n- D", letters, 0);
  EXPECT_EQ(gl.ranking, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Grounding, FuzzedRenderingsRecoverMatches) {
  const auto cat = rh_test::synthetic_catalog(300);
  const auto ids = rh_test::catalog_ids(cat);
  const auto inst = small_instance();
  Rng rng(2024);
  std::size_t total = 0, recovered = 0;
  for (std::size_t c = 0; c < 200; ++c) {
    const char* scheme = c % 3 == 0 ? "description" : c % 3 == 1 ? "token-numeric" : "token-letters";
    auto set = build_random_candidates(inst, ids, 20, c);
    auto r = render_identifiers(set, cat, parse_scheme(scheme));
    auto fc = rh_test::fuzz_case(r, rng);
    auto g = ground_output(fc.text, r, set.ground_truth_index);
    total += fc.expected.size();
    for (std::size_t p = 0; p < std::min(g.ranking.size(), fc.expected.size()); ++p) {
      if (g.ranking[p] == fc.expected[p]) ++recovered;
    }
  }
  EXPECT_GE(static_cast<double>(recovered) / static_cast<double>(total), 0.99);
}

TEST(Grounding, TruncatedOutputCoverage) {
  const auto cat = rh_test::synthetic_catalog(100);
  auto mock = llm::make_mock(llm::MockKind::Truncate, {0, 5, ""});
  const auto inst = small_instance();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto set = build_random_candidates(inst, rh_test::catalog_ids(cat), 20, seed);
    auto r = render_identifiers(set, cat, parse_scheme("description"));
    const llm::Message m{llm::Role::User,
                         "There are 20 candidate movies:\n" + join(r.lines, "\n") + "\n\nGo."};
    auto g = ground_output(mock->complete(std::span<const llm::Message>(&m, 1)), r,
                           set.ground_truth_index);
    EXPECT_EQ(g.ranking.size(), 15u);
    EXPECT_EQ(g.covered, *set.ground_truth_index < 15);
  }
}
