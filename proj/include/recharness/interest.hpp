#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "recharness/corpus.hpp"
#include "recharness/embedding.hpp"
#include "recharness/llm.hpp"
#include "recharness/templates.hpp"

namespace recharness::interest {

/// Reserved item key holding a user's reflected profile.
inline constexpr std::string_view kProfileKey = "__profile__";

enum class Scope { Global, Personalized };

struct MemoryKey {
  std::optional<std::string> user;  // nullopt: global scope
  std::string item_id;

  auto operator<=>(const MemoryKey&) const = default;
  bool operator==(const MemoryKey&) const = default;
};

struct MemoryEntry {
  MemoryKey key;
  std::string text;
  std::vector<double> embedding;  // unit norm or all zeros (empty allowed)
  std::int64_t ts = 0;            // 0 for global entries

  bool operator==(const MemoryEntry&) const = default;
};

/// Key-value interest memory. Reads may run concurrently; writes take an
/// exclusive lock.
class InterestMemory {
 public:
  explicit InterestMemory(Scope scope);
  InterestMemory(InterestMemory&& other) noexcept;
  InterestMemory& operator=(InterestMemory&& other) noexcept;

  Scope scope() const { return scope_; }

  /// Inserts or replaces. Rejects keys of the wrong scope and embeddings whose
  /// norm is neither 0 nor 1 +- 1e-6.
  void write(MemoryEntry entry);
  std::optional<MemoryEntry> read(const MemoryKey& key) const;
  /// A user's item entries (profile excluded), in key order.
  std::vector<MemoryEntry> user_entries(const std::string& user_id) const;
  /// Global entries for the given items (all when `items` is null), key order.
  std::vector<MemoryEntry> global_entries(const std::set<std::string>* items) const;
  std::size_t size() const;

  std::string to_jsonl() const;
  static InterestMemory from_jsonl(Scope scope, const std::string& text);

 private:
  Scope scope_;
  std::map<MemoryKey, MemoryEntry> entries_;
  std::unique_ptr<std::shared_mutex> mu_;
};

/// Thread-safe string cache for auxiliary generations; persisted as JSON Lines.
class GenerationCache {
 public:
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string value);
  std::size_t size() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  std::string to_jsonl() const;
  void load_jsonl(const std::string& text);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> values_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

struct SkipRecord {
  std::string user_id;
  std::string item_id;
  std::string reason;
};

/// Title for display; falls back to the id for unknown items.
std::string item_title(const corpus::Catalog& catalog, const std::string& item_id);

/// Memory text of an item: its description, else title plus attributes.
std::string item_memory_text(const corpus::ItemRecord& item);

InterestMemory build_global_memory(const corpus::Catalog& catalog,
                                   const llm::Embedder& embedder);

/// Prompt asking the LLM for a user's personalized description of an item.
std::string personal_description_prompt(const corpus::ItemRecord& item,
                                        const corpus::Interaction& event,
                                        const templates::Vocabulary& vocab);

struct PersonalMemoryResult {
  InterestMemory memory{Scope::Personalized};
  std::vector<SkipRecord> skipped;
  std::size_t llm_calls = 0;
};

/// One entry per (user, interacted item). Calls fan out over at most
/// `parallelism` threads; entries are committed in key order.
PersonalMemoryResult build_personalized_memory(const corpus::Histories& histories,
                                               const corpus::Catalog& catalog,
                                               llm::LanguageModel& llm,
                                               const llm::Embedder& embedder,
                                               const templates::Vocabulary& vocab,
                                               GenerationCache& cache,
                                               int parallelism = 1);

struct ReflectResult {
  std::string profile_text;
  bool cache_hit = false;
};

/// Summarizes a user's entries into a profile stored under
/// (user, kProfileKey). Unchanged entries hit the cache. On LLM failure the
/// memory is left untouched and the error propagates.
ReflectResult memory_reflect(InterestMemory& memory, const std::string& user_id,
                             llm::LanguageModel& llm, const templates::Vocabulary& vocab,
                             GenerationCache& cache);

enum class QueryMode { ShortTerm, LongAndShort };

struct InterestQuery {
  QueryMode mode = QueryMode::ShortTerm;
  std::string text;
  llm::EmbeddingVector embedding;
};

/// Recent-interest summary request over (at most) the last `window` titles.
std::string recent_summary_prompt(const std::vector<std::string>& recent_titles,
                                  const templates::Vocabulary& vocab, std::size_t window = 10);

/// Short-term: LLM summary of the recent titles. Long-and-short: the profile,
/// a blank line, then that summary.
InterestQuery make_query(QueryMode mode, const std::vector<std::string>& recent_titles,
                         const std::optional<std::string>& profile_text,
                         llm::LanguageModel& llm, const llm::Embedder& embedder,
                         const templates::Vocabulary& vocab, std::size_t window = 10);

struct RetrievalFilter {
  /// Global scope: restrict to these items (e.g. the user's history).
  const std::set<std::string>* allowed = nullptr;
  /// Items never returned.
  const std::set<std::string>* excluded = nullptr;
};

struct ScoredEntry {
  MemoryEntry entry;
  double cosine = 0.0;
  std::size_t age_rank = 0;
  double score = 0.0;
};

/// score = cosine(query, entry) * exp(-recency_lambda * age_rank). age_rank
/// counts a user's entries from newest (0) to oldest; global entries use a
/// recency factor of 1. Top-k by score, ties by item_id ascending.
std::vector<ScoredEntry> retrieve_from_memory(const InterestMemory& memory,
                                              const llm::EmbeddingVector& query,
                                              const std::string& user_id, std::size_t k,
                                              double recency_lambda,
                                              RetrievalFilter filter = {});

/// The ten user-interest modeling forms.
enum class InterestForm : int {
  RecentItems = 1,
  PersonalOfRecent = 2,
  RecentWithPersonal = 3,
  RecentWithShortSummary = 4,
  RetrievedItems = 5,
  RetrievedPersonal = 6,
  RetrievedPersonalSummary = 7,
  RecentAndRetrieved = 8,
  RetrievedPersonalProfileQuery = 9,
  RecentWithLongTermProfile = 10,
};

InterestForm form_from_id(int id);
std::string_view form_name(InterestForm form);
bool form_needs_personal_memory(InterestForm form, Scope retrieval_memory);

struct InterestContext {
  const corpus::Catalog* catalog = nullptr;
  const InterestMemory* global = nullptr;
  InterestMemory* personal = nullptr;
  llm::LanguageModel* llm = nullptr;
  const llm::Embedder* embedder = nullptr;
  GenerationCache* cache = nullptr;
  templates::Vocabulary vocab = templates::Vocabulary::for_domain(templates::Domain::Movie);
  double recency_lambda = 0.1;
  /// Memory searched by forms 5 and 8.
  Scope retrieval_memory = Scope::Personalized;
  /// Size of the recent window and of each retrieved set.
  std::size_t window = 10;
};

struct InterestProfile {
  InterestForm form = InterestForm::RecentItems;
  std::string rendered_text;
  std::vector<std::string> items_used;
  std::size_t llm_calls = 0;
  /// Title of the most recent history item (used by recency emphasis).
  std::string latest_title;
};

/// Numbered list, one "i. text" line per entry.
std::string numbered_block(const std::vector<std::string>& lines);

InterestProfile render_interest(InterestForm form, const corpus::EvalInstance& instance,
                                const InterestContext& ctx);

}  // namespace recharness::interest
