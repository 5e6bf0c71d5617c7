#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "recharness/common.hpp"
#include "recharness/templates.hpp"

using namespace recharness;
using namespace recharness::templates;

TEST(Templates, EmbeddedFragmentsMatchAssets) {
  const auto names = fragment_names();
  std::size_t files = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(std::string(RECHARNESS_ASSET_DIR) + "/templates")) {
    ++files;
    const auto stem = entry.path().stem().string();
    EXPECT_NE(std::find(names.begin(), names.end(), stem), names.end()) << stem;
    std::string text = read_file(entry.path().string());
    if (!text.empty() && text.back() == '\n') text.pop_back();
    EXPECT_EQ(fragment(stem), text) << stem;
  }
  EXPECT_EQ(files, names.size());
}

TEST(Templates, VocabularyPerDomain) {
  const auto movie = Vocabulary::for_domain(Domain::Movie);
  const auto book = Vocabulary::for_domain(Domain::Book);
  EXPECT_EQ(render("rank_history_header", movie),
            "I've watched the following movies in the past in order:");
  EXPECT_EQ(render("rank_history_header", book),
            "I've read the following books in the past in order:");
}

TEST(Templates, ExtraValuesAndNumbers) {
  const auto v = Vocabulary::for_domain(Domain::Movie);
  EXPECT_EQ(render("rank_candidates_header", v, {{"k", "20"}}),
            "Now there are 20 candidate movies that I can watch next:");
  EXPECT_EQ(format_number(4.0), "4");
  EXPECT_EQ(format_number(4.5), "4.5");
  EXPECT_THROW(fragment("no_such_fragment"), Error);
  EXPECT_THROW(parse_domain("music"), Error);
}
