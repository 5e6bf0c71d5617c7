#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace recharness::corpus {

/// One (user, item, rating, timestamp) event.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::optional<double> rating;  // [1, 5]; absent for implicit data
  std::int64_t timestamp = 0;    // seconds since epoch, >= 0

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ItemRecord {
  std::string item_id;
  std::string title;
  /// Ordered attribute list; keys are unique.
  std::vector<std::pair<std::string, std::string>> attributes;
  std::optional<std::string> description;

  const std::string* attribute(std::string_view key) const;
  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

using Catalog = std::map<std::string, ItemRecord>;

/// Chronological history: ascending timestamp, ties by item_id ascending.
struct UserHistory {
  std::string user_id;
  std::vector<Interaction> interactions;
};

using Histories = std::map<std::string, UserHistory>;

/// Leave-one-out instance: `prefix` is the history minus its last event.
struct EvalInstance {
  std::string user_id;
  std::vector<Interaction> prefix;
  std::string ground_truth;
};

struct LoadResult {
  std::vector<Interaction> interactions;
  Catalog catalog;
  std::vector<std::string> warnings;
};

/// MovieLens-1M `.dat` files (`::` separated, Latin-1 tolerant).
LoadResult load_movielens(const std::string& ratings_path,
                          const std::string& movies_path);

/// Amazon review + metadata JSON Lines. Items lacking a title or a
/// description are dropped together with their reviews.
LoadResult load_amazon_books(const std::string& reviews_path,
                             const std::string& meta_path);

/// Parses one `UserID::MovieID::Rating::Timestamp` line.
Interaction parse_movielens_rating(const std::string& line, std::size_t line_no);
/// Parses one `MovieID::Title::Genres` line; year comes from a trailing "(YYYY)".
ItemRecord parse_movielens_movie(const std::string& line, std::size_t line_no);

/// Iterated k-core filter; returns survivors in input order.
std::vector<Interaction> filter_k_core(const std::vector<Interaction>& interactions,
                                       std::size_t min_user_interactions,
                                       std::size_t min_item_interactions);

std::vector<Interaction> sort_history(std::vector<Interaction> events);

/// Groups, sorts and dedupes (same user, item, timestamp; first kept).
Histories build_histories(const std::vector<Interaction>& interactions);

EvalInstance leave_one_out(const UserHistory& history);

/// Uniform sample of `n` users among those with at least `min_history_len`
/// events, without replacement, reproducible per seed.
std::vector<EvalInstance> sample_users(const Histories& histories, std::size_t n,
                                       std::uint64_t seed,
                                       std::size_t min_history_len = 11);

struct CtrSelection {
  Interaction target;
  std::vector<Interaction> context;  // strictly earlier, oldest first
  bool label = false;
};

struct SkipReport {
  std::size_t skipped = 0;
  std::vector<std::string> reasons;

  std::string to_text() const;
};

struct CtrDataset {
  std::vector<CtrSelection> train;
  std::vector<CtrSelection> valid;
  std::vector<CtrSelection> test;
  /// Sizes of the three time-ordered slices of the window, before skips.
  std::array<std::size_t, 3> window_sizes{};
  double threshold = 4.0;
  std::size_t history_len = 10;
  SkipReport skips;
};

/// Dataset default rating cutoff for CTR labels.
double default_ctr_threshold(std::string_view dataset_kind);

/// Takes the newest `latest_n` interactions (global time order) and splits
/// them by `ratio` with the oldest slice as train. Targets with no earlier
/// interaction are skipped and reported.
CtrDataset ctr_split(const std::vector<Interaction>& interactions,
                     const Histories& histories, std::size_t latest_n,
                     std::array<std::size_t, 3> ratio, double threshold,
                     std::size_t history_len = 10);

// Normalized corpus cache (JSON Lines, stable field order).
std::string interactions_to_jsonl(const std::vector<Interaction>& interactions);
std::vector<Interaction> interactions_from_jsonl(const std::string& text);
std::string catalog_to_jsonl(const Catalog& catalog);
Catalog catalog_from_jsonl(const std::string& text);

/// Reads `{item_id, description}` lines and fills catalog descriptions.
std::size_t apply_descriptions_jsonl(Catalog& catalog, const std::string& text);

/// Hash over the serialized corpus, order-normalized.
std::string corpus_hash(const std::vector<Interaction>& interactions,
                        const Catalog& catalog);

}  // namespace recharness::corpus
