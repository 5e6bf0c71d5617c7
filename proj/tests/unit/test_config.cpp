#include <gtest/gtest.h>

#include <filesystem>

#include "recharness/config.hpp"

using namespace recharness;
using namespace recharness::config;
using ojson = nlohmann::ordered_json;

namespace {

std::string config_error(const ojson& doc, const std::vector<std::string>& overrides = {}) {
  try {
    resolve(doc, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsResolve) {
  auto c = resolve(ojson::object());
  EXPECT_EQ(c.sample.n_users, 200u);
  EXPECT_EQ(c.sample.repeats, 3u);
  EXPECT_EQ(c.candidates.k, 20u);
  EXPECT_TRUE(c.prompt.recency_focused);
  EXPECT_TRUE(c.prompt.cot_step_by_step);
  EXPECT_EQ(c.ctr.latest_n, 10000u);
  EXPECT_EQ(c.ctr.ratio, (std::array<std::size_t, 3>{8, 1, 1}));
  EXPECT_EQ(c.ctr.resolved_threshold("movielens"), 4.0);
  EXPECT_EQ(c.ctr.resolved_threshold("amazon_books"), 5.0);
  EXPECT_EQ(c.ctr.styles.size(), 4u);
  EXPECT_EQ(c.llm.provider, "mock");
  EXPECT_EQ(c.parallelism, 1);
}

TEST(Config, RepeatSeedsDerivedOrExplicit) {
  auto c = resolve(ojson::object());
  const auto seeds = c.repeat_seeds();
  ASSERT_EQ(seeds.size(), 3u);
  EXPECT_EQ(seeds[0], mix_seed(42, 1));
  EXPECT_EQ(seeds[2], mix_seed(42, 3));
  auto e = resolve(ojson::parse(R"({"sample": {"repeats": 2, "repeat_seeds": [5, 6]}})"));
  EXPECT_EQ(e.repeat_seeds(), (std::vector<std::uint64_t>{5, 6}));
  EXPECT_NE(config_error(ojson::parse(R"({"sample": {"repeat_seeds": [5]}})")), "");
}

TEST(Config, UnknownAndMistypedFieldsAreNamed) {
  EXPECT_EQ(config_error(ojson::parse(R"({"sample": {"users": 3}})")),
            "sample.users: unknown field");
  EXPECT_EQ(config_error(ojson::parse(R"({"bogus": 1})")), "bogus: unknown field");
  EXPECT_NE(config_error(ojson::parse(R"({"sample": {"n_users": "ten"}})")).find("sample.n_users"),
            std::string::npos);
  EXPECT_NE(config_error(ojson::parse(R"({"sample": {"n_users": -3}})")).find("sample.n_users"),
            std::string::npos);
  EXPECT_NE(config_error(ojson::parse(R"({"prompt": {"scheme": "emoji"}})")).find("prompt.scheme"),
            std::string::npos);
  EXPECT_NE(config_error(ojson::parse(R"({"interest": {"form": 11}})")).find("interest.form"),
            std::string::npos);
  EXPECT_NE(config_error(ojson::parse(R"({"candidates": {"k": 30}, "prompt": {"scheme": "letters"}})"))
                .find("26"),
            std::string::npos);
  EXPECT_NE(config_error(ojson::parse("[1]")), "");
}

TEST(Config, OverridesAreDotted) {
  auto c = resolve(ojson::object(), {"sample.n_users=5", "llm.mock.kind=oracle",
                                     "prompt.role_prompt=true", "ctr.threshold=3.5",
                                     "output.dir=/tmp/x y"});
  EXPECT_EQ(c.sample.n_users, 5u);
  EXPECT_EQ(c.llm.mock_kind, llm::MockKind::Oracle);
  EXPECT_TRUE(c.prompt.role_prompt);
  EXPECT_EQ(c.ctr.resolved_threshold("movielens"), 3.5);
  EXPECT_EQ(c.output.dir, "/tmp/x y");
  EXPECT_NE(config_error(ojson::object(), {"sample.n_users"}), "");
  EXPECT_EQ(config_error(ojson::object(), {"sample.nope=1"}), "sample.nope: unknown field");
}

TEST(Config, HashIgnoresOutputBlock) {
  auto a = resolve(ojson::object(), {"output.dir=a", "output.timing=true"});
  auto b = resolve(ojson::object(), {"output.dir=b"});
  auto c = resolve(ojson::object(), {"sample.seed=43"});
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 64u);
}

TEST(Config, OpenAiProviderNeedsEndpoint) {
  EXPECT_NE(config_error(ojson::object(), {"llm.provider=openai", "llm.model="}), "");
  EXPECT_EQ(config_error(ojson::object(), {"llm.provider=openai"}), "");
  EXPECT_NE(config_error(ojson::object(), {"embedder.provider=remote"}), "");
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "recharness_config_test.json";
  write_file(path.string(), R"({"sample": {"n_users": 7}})");
  EXPECT_EQ(load(path.string(), {"sample.seed=1"}).sample.n_users, 7u);
  write_file(path.string(), "{not json");
  EXPECT_THROW(load(path.string()), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load(path.string()), ConfigError);
  EXPECT_EQ(load(std::nullopt).sample.n_users, 200u);
}
