#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "recharness/interest.hpp"
#include "test_support.hpp"

using namespace recharness;
using namespace recharness::interest;

namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

class ThrowingModel final : public llm::LanguageModel {
 public:
  explicit ThrowingModel(std::string marker) : marker_(std::move(marker)) {}
  std::string complete(std::span<const llm::Message> messages,
                       const llm::OracleHint&) override {
    const auto text = llm::last_user_content(messages);
    if (text.find(marker_) != std::string::npos) throw Error("refused");
    return "note: " + text.substr(0, 40);
  }
  std::string describe() const override { return "throwing"; }

 private:
  std::string marker_;
};

/// One user with a 25-event history over a 60-item catalog and both memories.
struct Fixture {
  corpus::Catalog catalog = rh_test::synthetic_catalog(60);
  corpus::EvalInstance instance;
  llm::HashedBowEmbedder embedder{64};
  std::unique_ptr<llm::LanguageModel> model = llm::make_mock(llm::MockKind::Echo);
  GenerationCache cache;
  InterestMemory global{Scope::Global};
  InterestMemory personal{Scope::Personalized};

  Fixture() {
    instance.user_id = "u1";
    for (std::size_t k = 0; k < 25; ++k) {
      instance.prefix.push_back({"u1", rh_test::item_id((k * 7) % 60), 4.0,
                                 static_cast<std::int64_t>(100 + k)});
    }
    instance.ground_truth = rh_test::item_id(59);
    global = build_global_memory(catalog, embedder);
    corpus::Histories h;
    h["u1"] = {"u1", instance.prefix};
    auto vocab = templates::Vocabulary::for_domain(templates::Domain::Movie);
    personal = std::move(
        build_personalized_memory(h, catalog, *model, embedder, vocab, cache).memory);
  }

  InterestContext ctx(Scope retrieval = Scope::Personalized) {
    InterestContext c;
    c.catalog = &catalog;
    c.global = &global;
    c.personal = &personal;
    c.llm = model.get();
    c.embedder = &embedder;
    c.cache = &cache;
    c.retrieval_memory = retrieval;
    return c;
  }

  std::vector<std::string> last_ten() const {
    std::vector<std::string> ids;
    for (std::size_t i = instance.prefix.size() - 10; i < instance.prefix.size(); ++i) {
      ids.push_back(instance.prefix[i].item_id);
    }
    return ids;
  }
  std::set<std::string> prefix_set() const {
    std::set<std::string> s;
    for (const auto& e : instance.prefix) s.insert(e.item_id);
    return s;
  }
};

}  // namespace

TEST(InterestMemory, WriteValidatesScopeAndNorm) {
  InterestMemory g(Scope::Global);
  EXPECT_THROW(g.write({{std::string("u"), "i"}, "t", {}, 0}), Error);
  EXPECT_NO_THROW(g.write({{std::nullopt, "i"}, "t", {0.6, 0.8}, 0}));
  EXPECT_THROW(g.write({{std::nullopt, "j"}, "t", {0.6, 0.9}, 0}), Error);
  EXPECT_NO_THROW(g.write({{std::nullopt, "k"}, "t", {0.0, 0.0}, 0}));
  InterestMemory p(Scope::Personalized);
  EXPECT_THROW(p.write({{std::nullopt, "i"}, "t", {}, 0}), Error);
  EXPECT_THROW(p.write({{std::string("u"), ""}, "t", {}, 0}), Error);
}

TEST(InterestMemory, JsonlRoundTrip) {
  InterestMemory p(Scope::Personalized);
  p.write({{std::string("u1"), "a"}, "first", {1.0, 0.0}, 10});
  p.write({{std::string("u1"), "b"}, "second \"quoted\"", {0.0, 1.0}, 20});
  p.write({{std::string("u2"), "a"}, "other", {}, 5});
  const auto text = p.to_jsonl();
  auto back = InterestMemory::from_jsonl(Scope::Personalized, text);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.to_jsonl(), text);
  EXPECT_EQ(back.read({std::string("u1"), "b"})->text, "second \"quoted\"");
  EXPECT_EQ(back.user_entries("u1").size(), 2u);
}

TEST(InterestMemory, ItemMemoryTextPrefersDescription) {
  corpus::ItemRecord r{"x", "Title", {{"genre", "Drama"}, {"year", "1999"}}, std::nullopt};
  EXPECT_EQ(item_memory_text(r), "Title. genre: Drama; year: 1999");
  r.description = "A long story.";
  EXPECT_EQ(item_memory_text(r), "A long story.");
}

TEST(InterestMemory, PersonalMemoryIndependentOfParallelism) {
  auto cat = rh_test::synthetic_catalog(40);
  auto inst = rh_test::synthetic_instances(6, 12, 40, 3);
  auto hist = corpus::build_histories(rh_test::instance_events(inst));
  auto model = llm::make_mock(llm::MockKind::Echo);
  llm::HashedBowEmbedder emb(32);
  auto vocab = templates::Vocabulary::for_domain(templates::Domain::Movie);
  GenerationCache c1, c4;
  auto r1 = build_personalized_memory(hist, cat, *model, emb, vocab, c1, 1);
  auto r4 = build_personalized_memory(hist, cat, *model, emb, vocab, c4, 4);
  EXPECT_EQ(r1.memory.to_jsonl(), r4.memory.to_jsonl());
  EXPECT_EQ(r1.llm_calls, 72u);
  EXPECT_EQ(c1.to_jsonl(), c4.to_jsonl());
  auto again = build_personalized_memory(hist, cat, *model, emb, vocab, c1, 4);
  EXPECT_EQ(again.llm_calls, 0u);
  EXPECT_EQ(again.memory.to_jsonl(), r1.memory.to_jsonl());
}

TEST(InterestMemory, FailedGenerationsAreSkipped) {
  auto cat = rh_test::synthetic_catalog(10);
  corpus::Histories h;
  h["u"] = {"u", {{"u", "i1", 5.0, 1}, {"u", "i2", 3.0, 2}, {"u", "missing", 3.0, 3}}};
  ThrowingModel model(rh_test::synthetic_title(2).substr(0, 6));
  llm::HashedBowEmbedder emb(16);
  GenerationCache cache;
  auto r = build_personalized_memory(h, cat, model, emb,
                                     templates::Vocabulary::for_domain(templates::Domain::Movie),
                                     cache);
  EXPECT_EQ(r.memory.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].item_id, "missing");
  EXPECT_EQ(r.skipped[1].item_id, "i2");
  EXPECT_EQ(cache.size(), 1u);
}

TEST(InterestMemory, PersonalPromptMentionsFeedback) {
  corpus::ItemRecord r{"x", "Heat (1995)", {{"genre", "Action"}}, std::nullopt};
  auto vocab = templates::Vocabulary::for_domain(templates::Domain::Movie);
  const auto rated = personal_description_prompt(r, {"u", "x", 4.0, 1}, vocab);
  EXPECT_NE(rated.find("Heat (1995)"), std::string::npos);
  EXPECT_NE(rated.find("rated it 4 out of 5"), std::string::npos);
  const auto implicit = personal_description_prompt(r, {"u", "x", std::nullopt, 1}, vocab);
  EXPECT_EQ(implicit.find("rated it"), std::string::npos);
}

TEST(InterestMemory, ReflectCachesAndStoresProfile) {
  Fixture f;
  auto vocab = f.ctx().vocab;
  auto first = memory_reflect(f.personal, "u1", *f.model, vocab, f.cache);
  EXPECT_FALSE(first.cache_hit);
  auto second = memory_reflect(f.personal, "u1", *f.model, vocab, f.cache);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(first.profile_text, second.profile_text);
  auto stored = f.personal.read({std::string("u1"), std::string(kProfileKey)});
  ASSERT_TRUE(stored);
  EXPECT_EQ(stored->text, first.profile_text);
  EXPECT_EQ(stored->ts, 124);
  EXPECT_EQ(f.personal.user_entries("u1").size(), 25u);
}

TEST(Retrieval, ZeroLambdaIsPureCosineOrder) {
  Rng rng(11);
  const std::size_t dim = 8;
  InterestMemory mem(Scope::Personalized);
  std::vector<MemoryEntry> all;
  for (std::size_t i = 0; i < 30; ++i) {
    MemoryEntry e{{std::string("u"), rh_test::item_id(i)}, "t", unit_vector(rng, dim),
                  static_cast<std::int64_t>(rng.uniform_index(1000))};
    all.push_back(e);
    mem.write(e);
  }
  llm::EmbeddingVector q{unit_vector(rng, dim)};
  for (double lambda : {0.0, 0.3}) {
    // Exhaustive scan with independently computed ages and scores.
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& e : all) {
      double dot = 0;
      for (std::size_t d = 0; d < dim; ++d) dot += e.embedding[d] * q.values[d];
      std::size_t age = 0;
      for (const auto& o : all) {
        if (o.ts > e.ts || (o.ts == e.ts && o.key.item_id > e.key.item_id)) ++age;
      }
      expected.emplace_back(dot * std::exp(-lambda * static_cast<double>(age)), e.key.item_id);
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    auto got = retrieve_from_memory(mem, q, "u", 30, lambda);
    ASSERT_EQ(got.size(), 30u);
    for (std::size_t i = 0; i < 30; ++i) {
      EXPECT_EQ(got[i].entry.key.item_id, expected[i].second) << "lambda " << lambda;
      EXPECT_NEAR(got[i].score, expected[i].first, 1e-12);
    }
    auto top5 = retrieve_from_memory(mem, q, "u", 5, lambda);
    ASSERT_EQ(top5.size(), 5u);
    EXPECT_EQ(top5[4].entry.key.item_id, expected[4].second);
  }
}

TEST(Retrieval, FiltersAndGlobalScope) {
  Fixture f;
  const auto allowed = f.prefix_set();
  const std::set<std::string> excluded{f.instance.prefix.back().item_id};
  auto q = f.embedder.embed(rh_test::synthetic_title(7));
  auto hits = retrieve_from_memory(f.global, q, "u1", 60, 5.0, {&allowed, &excluded});
  EXPECT_EQ(hits.size(), allowed.size() - 1);
  for (const auto& h : hits) {
    EXPECT_TRUE(allowed.count(h.entry.key.item_id));
    EXPECT_EQ(h.score, h.cosine);
  }
  EXPECT_EQ(hits.front().entry.key.item_id, "i7");
}

TEST(InterestForms, Names) {
  EXPECT_THROW(form_from_id(0), ConfigError);
  EXPECT_THROW(form_from_id(11), ConfigError);
  std::set<std::string_view> names;
  for (int i = 1; i <= 10; ++i) names.insert(form_name(form_from_id(i)));
  EXPECT_EQ(names.size(), 10u);
  EXPECT_EQ(numbered_block({"a", "b"}), "1. a\n2. b");
}

TEST(InterestForms, DispatchTable) {
  struct Row {
    int form;
    std::size_t cold_calls;
    std::size_t warm_calls;
    bool exact_recent;  // items_used is exactly the last ten items
  };
  const Row rows[] = {{1, 0, 0, true},  {2, 0, 0, true},  {3, 0, 0, true},  {4, 1, 1, true},
                      {5, 0, 0, false}, {6, 0, 0, false}, {7, 1, 1, false}, {8, 0, 0, false},
                      {9, 2, 1, false}, {10, 1, 0, true}};
  for (const auto& row : rows) {
    Fixture f;
    const auto form = form_from_id(row.form);
    auto cold = render_interest(form, f.instance, f.ctx());
    auto warm = render_interest(form, f.instance, f.ctx());
    EXPECT_EQ(cold.llm_calls, row.cold_calls) << "form " << row.form;
    EXPECT_EQ(warm.llm_calls, row.warm_calls) << "form " << row.form;
    EXPECT_EQ(cold.rendered_text, warm.rendered_text) << "form " << row.form;
    EXPECT_EQ(cold.latest_title, rh_test::synthetic_title((24 * 7) % 60));
    const auto recent = f.last_ten();
    const auto prefix = f.prefix_set();
    if (row.exact_recent) {
      EXPECT_EQ(cold.items_used, recent) << "form " << row.form;
    } else if (row.form == 8) {
      ASSERT_GT(cold.items_used.size(), 10u);
      EXPECT_TRUE(std::equal(recent.begin(), recent.end(), cold.items_used.begin()));
      const std::set<std::string> recent_set(recent.begin(), recent.end());
      for (std::size_t i = 10; i < cold.items_used.size(); ++i) {
        EXPECT_FALSE(recent_set.count(cold.items_used[i]));
        EXPECT_TRUE(prefix.count(cold.items_used[i]));
      }
    } else {
      EXPECT_EQ(cold.items_used.size(), 10u) << "form " << row.form;
      for (const auto& id : cold.items_used) EXPECT_TRUE(prefix.count(id));
    }
    EXPECT_FALSE(cold.rendered_text.empty());
  }
}

TEST(InterestForms, RetrievedItemsAreChronological) {
  Fixture f;
  auto p = render_interest(InterestForm::RetrievedItems, f.instance, f.ctx(Scope::Global));
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < f.instance.prefix.size(); ++i) pos[f.instance.prefix[i].item_id] = i;
  for (std::size_t i = 1; i < p.items_used.size(); ++i) {
    EXPECT_LT(pos[p.items_used[i - 1]], pos[p.items_used[i]]);
  }
}

TEST(InterestForms, MissingPersonalMemoryIsAnError) {
  Fixture f;
  auto ctx = f.ctx(Scope::Global);
  ctx.personal = nullptr;
  EXPECT_NO_THROW(render_interest(InterestForm::RecentItems, f.instance, ctx));
  EXPECT_NO_THROW(render_interest(InterestForm::RetrievedItems, f.instance, ctx));
  EXPECT_NO_THROW(render_interest(InterestForm::RecentWithShortSummary, f.instance, ctx));
  for (int id : {2, 3, 6, 7, 9, 10}) {
    EXPECT_THROW(render_interest(form_from_id(id), f.instance, ctx), Error) << id;
  }
}
