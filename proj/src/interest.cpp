#include "recharness/interest.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "recharness/common.hpp"
#include "recharness/kernels.hpp"

namespace recharness::interest {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// InterestMemory

InterestMemory::InterestMemory(Scope scope)
    : scope_(scope), mu_(std::make_unique<std::shared_mutex>()) {}

InterestMemory::InterestMemory(InterestMemory&& other) noexcept
    : scope_(other.scope_),
      entries_(std::move(other.entries_)),
      mu_(std::make_unique<std::shared_mutex>()) {}

InterestMemory& InterestMemory::operator=(InterestMemory&& other) noexcept {
  scope_ = other.scope_;
  entries_ = std::move(other.entries_);
  return *this;
}

void InterestMemory::write(MemoryEntry entry) {
  if (scope_ == Scope::Global && entry.key.user) {
    throw Error("global memory accepts only global keys (got user " + *entry.key.user + ")");
  }
  if (scope_ == Scope::Personalized && !entry.key.user) {
    throw Error("personalized memory accepts only user-scoped keys");
  }
  if (entry.key.item_id.empty()) throw Error("memory key has an empty item id");
  const double n = kernels::norm(entry.embedding);
  if (n != 0.0 && std::abs(n - 1.0) > 1e-6) {
    throw Error("memory embedding norm " + std::to_string(n) + " is neither 0 nor 1");
  }
  std::unique_lock lock(*mu_);
  MemoryKey key = entry.key;
  entries_.insert_or_assign(std::move(key), std::move(entry));
}

std::optional<MemoryEntry> InterestMemory::read(const MemoryKey& key) const {
  std::shared_lock lock(*mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<MemoryEntry> InterestMemory::user_entries(const std::string& user_id) const {
  std::shared_lock lock(*mu_);
  std::vector<MemoryEntry> out;
  auto it = entries_.lower_bound(MemoryKey{user_id, ""});
  for (; it != entries_.end() && it->first.user == user_id; ++it) {
    if (it->first.item_id == kProfileKey) continue;
    out.push_back(it->second);
  }
  return out;
}

std::vector<MemoryEntry> InterestMemory::global_entries(const std::set<std::string>* items) const {
  std::shared_lock lock(*mu_);
  std::vector<MemoryEntry> out;
  if (items) {
    for (const auto& id : *items) {
      auto it = entries_.find(MemoryKey{std::nullopt, id});
      if (it != entries_.end()) out.push_back(it->second);
    }
    return out;
  }
  for (const auto& [key, e] : entries_) {
    if (!key.user) out.push_back(e);
  }
  return out;
}

std::size_t InterestMemory::size() const {
  std::shared_lock lock(*mu_);
  return entries_.size();
}

std::string InterestMemory::to_jsonl() const {
  std::shared_lock lock(*mu_);
  std::string out;
  for (const auto& [key, e] : entries_) {
    ojson j;
    ojson k;
    k["user"] = key.user ? ojson(*key.user) : ojson(nullptr);
    k["item_id"] = key.item_id;
    j["key"] = k;
    j["text"] = e.text;
    j["ts"] = e.ts;
    j["embedding"] = e.embedding;
    out += j.dump();
    out += '\n';
  }
  return out;
}

InterestMemory InterestMemory::from_jsonl(Scope scope, const std::string& text) {
  InterestMemory m(scope);
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      MemoryEntry e;
      const auto& k = j.at("key");
      if (!k.at("user").is_null()) e.key.user = k.at("user").get<std::string>();
      e.key.item_id = k.at("item_id").get<std::string>();
      e.text = j.at("text").get<std::string>();
      e.ts = j.at("ts").get<std::int64_t>();
      e.embedding = j.at("embedding").get<std::vector<double>>();
      m.write(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error("memory line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// GenerationCache

std::optional<std::string> GenerationCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = values_.find(key);
  if (it == values_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return it->second;
}

void GenerationCache::put(const std::string& key, std::string value) {
  std::lock_guard lock(mu_);
  values_.insert_or_assign(key, std::move(value));
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return values_.size();
}

std::string GenerationCache::to_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& [k, v] : values_) {
    ojson j;
    j["key"] = k;
    j["value"] = v;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void GenerationCache::load_jsonl(const std::string& text) {
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    put(j.at("key").get<std::string>(), j.at("value").get<std::string>());
  }
}

// ---------------------------------------------------------------------------
// Builders

std::string item_title(const corpus::Catalog& catalog, const std::string& item_id) {
  auto it = catalog.find(item_id);
  return it == catalog.end() ? item_id : it->second.title;
}

std::string item_memory_text(const corpus::ItemRecord& item) {
  if (item.description && !item.description->empty()) return *item.description;
  std::string text = item.title;
  if (!item.attributes.empty()) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : item.attributes) parts.push_back(k + ": " + v);
    text += ". " + join(parts, "; ");
  }
  return text;
}

InterestMemory build_global_memory(const corpus::Catalog& catalog,
                                   const llm::Embedder& embedder) {
  InterestMemory m(Scope::Global);
  for (const auto& [id, item] : catalog) {
    MemoryEntry e;
    e.key = {std::nullopt, id};
    e.text = item_memory_text(item);
    e.embedding = embedder.embed(e.text).values;
    m.write(std::move(e));
  }
  return m;
}

std::string personal_description_prompt(const corpus::ItemRecord& item,
                                        const corpus::Interaction& event,
                                        const templates::Vocabulary& vocab) {
  std::string attrs;
  if (!item.attributes.empty()) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : item.attributes) parts.push_back(k + ": " + v);
    attrs = " (" + join(parts, "; ") + ")";
  }
  std::string feedback =
      event.rating ? "rated it " + templates::format_number(*event.rating) + " out of 5"
                   : "interacted with it";
  return templates::render("request_personal_description", vocab,
                           {{"title", item.title}, {"attributes", attrs}, {"feedback", feedback}});
}

PersonalMemoryResult build_personalized_memory(const corpus::Histories& histories,
                                               const corpus::Catalog& catalog,
                                               llm::LanguageModel& llm,
                                               const llm::Embedder& embedder,
                                               const templates::Vocabulary& vocab,
                                               GenerationCache& cache, int parallelism) {
  struct Job {
    const corpus::Interaction* event;
    std::string prompt;
    std::string cache_key;
    std::optional<std::string> text;
    std::string error;
    bool called = false;
  };
  const std::string template_hash =
      sha256_hex(templates::fragment("request_personal_description"));
  std::vector<Job> jobs;
  std::vector<SkipRecord> skipped;
  for (const auto& [user, h] : histories) {
    for (const auto& ev : h.interactions) {
      auto item = catalog.find(ev.item_id);
      if (item == catalog.end()) {
        skipped.push_back({user, ev.item_id, "item missing from catalog"});
        continue;
      }
      Job job;
      job.event = &ev;
      job.prompt = personal_description_prompt(item->second, ev, vocab);
      job.cache_key = sha256_hex(user + '\x1f' + ev.item_id + '\x1f' + template_hash);
      jobs.push_back(std::move(job));
    }
  }

  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, parallelism))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Job& job = jobs[static_cast<std::size_t>(i)];
    if (auto hit = cache.get(job.cache_key)) {
      job.text = std::move(*hit);
      continue;
    }
    try {
      job.called = true;
      const llm::Message msg{llm::Role::User, job.prompt};
      job.text = llm.complete(std::span<const llm::Message>(&msg, 1));
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  }

  PersonalMemoryResult out;
  out.skipped = std::move(skipped);
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::tie(a.event->user_id, a.event->item_id, a.event->timestamp) <
           std::tie(b.event->user_id, b.event->item_id, b.event->timestamp);
  });
  for (auto& job : jobs) {
    if (job.called) ++out.llm_calls;
    if (!job.text) {
      out.skipped.push_back({job.event->user_id, job.event->item_id, job.error});
      continue;
    }
    if (job.called) cache.put(job.cache_key, *job.text);
    MemoryEntry e;
    e.key = {job.event->user_id, job.event->item_id};
    e.text = *job.text;
    e.embedding = embedder.embed(e.text).values;
    e.ts = job.event->timestamp;
    out.memory.write(std::move(e));
  }
  return out;
}

ReflectResult memory_reflect(InterestMemory& memory, const std::string& user_id,
                             llm::LanguageModel& llm, const templates::Vocabulary& vocab,
                             GenerationCache& cache) {
  if (memory.scope() != Scope::Personalized) {
    throw Error("memory_reflect requires a personalized memory");
  }
  auto entries = memory.user_entries(user_id);
  if (entries.empty()) throw Error("memory_reflect: user " + user_id + " has no entries");
  std::sort(entries.begin(), entries.end(), [](const MemoryEntry& a, const MemoryEntry& b) {
    return std::tie(a.ts, a.key.item_id) < std::tie(b.ts, b.key.item_id);
  });
  std::vector<std::string> notes;
  std::int64_t latest = 0;
  for (const auto& e : entries) {
    notes.push_back("- " + e.text);
    latest = std::max(latest, e.ts);
  }
  const std::string prompt =
      templates::render("request_reflect", vocab, {{"notes", join(notes, "\n")}});
  const std::string key = sha256_hex("reflect\x1f" + user_id + '\x1f' + prompt);

  ReflectResult result;
  if (auto hit = cache.get(key)) {
    result.profile_text = std::move(*hit);
    result.cache_hit = true;
  } else {
    const llm::Message msg{llm::Role::User, prompt};
    result.profile_text = llm.complete(std::span<const llm::Message>(&msg, 1));
    cache.put(key, result.profile_text);
  }
  MemoryEntry profile;
  profile.key = {user_id, std::string(kProfileKey)};
  profile.text = result.profile_text;
  profile.ts = latest;
  memory.write(std::move(profile));
  return result;
}

// ---------------------------------------------------------------------------
// Queries and retrieval

namespace {

std::vector<std::string> last_n(const std::vector<std::string>& v, std::size_t n) {
  if (v.size() <= n) return v;
  return {v.end() - static_cast<std::ptrdiff_t>(n), v.end()};
}

}  // namespace

std::string recent_summary_prompt(const std::vector<std::string>& recent_titles,
                                  const templates::Vocabulary& vocab, std::size_t window) {
  return templates::render("request_recent_summary", vocab,
                           {{"titles", numbered_block(last_n(recent_titles, window))}});
}

InterestQuery make_query(QueryMode mode, const std::vector<std::string>& recent_titles,
                         const std::optional<std::string>& profile_text,
                         llm::LanguageModel& llm, const llm::Embedder& embedder,
                         const templates::Vocabulary& vocab, std::size_t window) {
  if (recent_titles.empty()) throw Error("make_query: no recent items");
  if (mode == QueryMode::LongAndShort && (!profile_text || profile_text->empty())) {
    throw Error("make_query: long-and-short mode requires a user profile");
  }
  const llm::Message msg{llm::Role::User, recent_summary_prompt(recent_titles, vocab, window)};
  const std::string summary = llm.complete(std::span<const llm::Message>(&msg, 1));
  InterestQuery q;
  q.mode = mode;
  q.text = mode == QueryMode::ShortTerm ? summary : *profile_text + "\n\n" + summary;
  if (trim(q.text).empty()) throw Error("make_query: empty query text");
  q.embedding = embedder.embed(q.text);
  return q;
}

std::vector<ScoredEntry> retrieve_from_memory(const InterestMemory& memory,
                                              const llm::EmbeddingVector& query,
                                              const std::string& user_id, std::size_t k,
                                              double recency_lambda, RetrievalFilter filter) {
  if (k == 0) throw Error("retrieve_from_memory: k must be >= 1");
  std::vector<ScoredEntry> pool;
  if (memory.scope() == Scope::Personalized) {
    auto entries = memory.user_entries(user_id);
    std::vector<std::size_t> order(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = entries[a];
      const auto& eb = entries[b];
      if (ea.ts != eb.ts) return ea.ts > eb.ts;
      return ea.key.item_id > eb.key.item_id;
    });
    std::vector<std::size_t> age(entries.size());
    for (std::size_t r = 0; r < order.size(); ++r) age[order[r]] = r;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      pool.push_back({std::move(entries[i]), 0.0, age[i], 0.0});
    }
  } else {
    for (auto& e : memory.global_entries(filter.allowed)) pool.push_back({std::move(e), 0.0, 0, 0.0});
  }
  std::erase_if(pool, [&](const ScoredEntry& s) {
    const auto& id = s.entry.key.item_id;
    if (filter.allowed && !filter.allowed->count(id)) return true;
    if (filter.excluded && filter.excluded->count(id)) return true;
    return false;
  });
  if (pool.empty()) return {};

  const std::size_t dim = query.values.size();
  std::vector<double> rows(pool.size() * dim, 0.0);
  for (std::size_t r = 0; r < pool.size(); ++r) {
    const auto& emb = pool[r].entry.embedding;
    if (emb.empty()) continue;
    if (emb.size() != dim) {
      throw Error("retrieve_from_memory: embedding dimension " + std::to_string(emb.size()) +
                  " != query dimension " + std::to_string(dim));
    }
    std::copy(emb.begin(), emb.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  std::vector<double> cos(pool.size());
  kernels::cosine_scores(rows, dim, query.values, cos);

  const bool decay = memory.scope() == Scope::Personalized;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    pool[r].cosine = cos[r];
    const double factor =
        decay ? std::exp(-recency_lambda * static_cast<double>(pool[r].age_rank)) : 1.0;
    pool[r].score = cos[r] * factor;
  }
  std::sort(pool.begin(), pool.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry.key.item_id < b.entry.key.item_id;
  });
  if (pool.size() > k) pool.resize(k);
  return pool;
}

// ---------------------------------------------------------------------------
// Modeling forms

InterestForm form_from_id(int id) {
  if (id < 1 || id > 10) {
    throw ConfigError("interest form id " + std::to_string(id) + " is outside 1..10");
  }
  return static_cast<InterestForm>(id);
}

std::string_view form_name(InterestForm form) {
  switch (form) {
    case InterestForm::RecentItems: return "recent-items";
    case InterestForm::PersonalOfRecent: return "personalized-interest-of-recent-items";
    case InterestForm::RecentWithPersonal: return "recent-items-with-personalized-interest";
    case InterestForm::RecentWithShortSummary: return "recent-items-with-short-term-summary";
    case InterestForm::RetrievedItems: return "retrieved-items-recent-query";
    case InterestForm::RetrievedPersonal: return "retrieved-personalized-interest-recent-query";
    case InterestForm::RetrievedPersonalSummary: return "summary-of-retrieved-personalized-interest";
    case InterestForm::RecentAndRetrieved: return "recent-and-retrieved-items";
    case InterestForm::RetrievedPersonalProfileQuery:
      return "retrieved-personalized-interest-profile-query";
    case InterestForm::RecentWithLongTermProfile: return "recent-items-with-long-term-profile";
  }
  return "unknown";
}

bool form_needs_personal_memory(InterestForm form, Scope retrieval_memory) {
  switch (form) {
    case InterestForm::RecentItems:
    case InterestForm::RecentWithShortSummary:
      return false;
    case InterestForm::RetrievedItems:
    case InterestForm::RecentAndRetrieved:
      return retrieval_memory == Scope::Personalized;
    default:
      return true;
  }
}

std::string numbered_block(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + lines[i];
  }
  return out;
}

namespace {

struct FormState {
  const corpus::EvalInstance& instance;
  const InterestContext& ctx;
  llm::CountingModel* llm;
  std::vector<std::string> recent_ids;
  std::vector<std::string> recent_titles;
  std::set<std::string> prefix_items;

  std::string title(const std::string& id) const { return item_title(*ctx.catalog, id); }

  std::string personal_text(const std::string& id) const {
    if (auto e = ctx.personal->read(MemoryKey{instance.user_id, id})) return e->text;
    return title(id);
  }

  std::string history_block() const {
    return templates::render("rank_history_header", ctx.vocab) + "\n" +
           numbered_block(recent_titles);
  }

  std::string complete(const std::string& prompt) const {
    const llm::Message msg{llm::Role::User, prompt};
    return llm->complete(std::span<const llm::Message>(&msg, 1));
  }

  /// Retrieved item ids, re-ordered chronologically by their last position in
  /// the history.
  std::vector<std::string> retrieve(const InterestMemory& memory,
                                    const llm::EmbeddingVector& query,
                                    const std::set<std::string>* excluded) const {
    RetrievalFilter filter{&prefix_items, excluded};
    auto hits = retrieve_from_memory(memory, query, instance.user_id, ctx.window,
                                     ctx.recency_lambda, filter);
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < instance.prefix.size(); ++i) {
      position[instance.prefix[i].item_id] = i;
    }
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.entry.key.item_id);
    std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
      return position[a] < position[b];
    });
    return ids;
  }

  llm::EmbeddingVector recent_titles_query() const {
    return ctx.embedder->embed(join(recent_titles, "\n"));
  }

  const InterestMemory& retrieval_memory() const {
    return ctx.retrieval_memory == Scope::Global ? *ctx.global : *ctx.personal;
  }
};

}  // namespace

InterestProfile render_interest(InterestForm form, const corpus::EvalInstance& instance,
                                const InterestContext& ctx) {
  if (!ctx.catalog) throw Error("render_interest: catalog missing");
  if (instance.prefix.empty()) throw Error("render_interest: empty history");
  const bool needs_personal = form_needs_personal_memory(form, ctx.retrieval_memory);
  if (needs_personal && !ctx.personal) {
    throw Error("interest form " + std::to_string(static_cast<int>(form)) + " (" +
                std::string(form_name(form)) + ") requires a personalized memory");
  }
  const bool retrieves = form == InterestForm::RetrievedItems ||
                         form == InterestForm::RetrievedPersonal ||
                         form == InterestForm::RetrievedPersonalSummary ||
                         form == InterestForm::RecentAndRetrieved ||
                         form == InterestForm::RetrievedPersonalProfileQuery;
  if (retrieves && !ctx.embedder) throw Error("render_interest: retrieval needs an embedder");
  if ((form == InterestForm::RetrievedItems || form == InterestForm::RecentAndRetrieved) &&
      ctx.retrieval_memory == Scope::Global && !ctx.global) {
    throw Error("interest form " + std::to_string(static_cast<int>(form)) +
                " requires a global memory");
  }
  const bool calls_llm = form == InterestForm::RecentWithShortSummary ||
                         form == InterestForm::RetrievedPersonalSummary ||
                         form == InterestForm::RetrievedPersonalProfileQuery ||
                         form == InterestForm::RecentWithLongTermProfile;
  if (calls_llm && !ctx.llm) throw Error("render_interest: form needs an LLM");
  if ((form == InterestForm::RetrievedPersonalProfileQuery ||
       form == InterestForm::RecentWithLongTermProfile) &&
      !ctx.cache) {
    throw Error("render_interest: profile forms need a generation cache");
  }

  std::optional<llm::CountingModel> counter;
  if (ctx.llm) counter.emplace(*ctx.llm);
  FormState st{instance, ctx, counter ? &*counter : nullptr, {}, {}, {}};
  const std::size_t start =
      instance.prefix.size() > ctx.window ? instance.prefix.size() - ctx.window : 0;
  for (std::size_t i = start; i < instance.prefix.size(); ++i) {
    st.recent_ids.push_back(instance.prefix[i].item_id);
    st.recent_titles.push_back(st.title(instance.prefix[i].item_id));
  }
  for (const auto& ev : instance.prefix) st.prefix_items.insert(ev.item_id);

  InterestProfile p;
  p.form = form;
  p.latest_title = st.title(instance.prefix.back().item_id);
  const auto& vocab = ctx.vocab;

  auto personal_lines = [&](const std::vector<std::string>& ids) {
    std::vector<std::string> lines;
    for (const auto& id : ids) lines.push_back(st.personal_text(id));
    return numbered_block(lines);
  };
  auto title_lines = [&](const std::vector<std::string>& ids) {
    std::vector<std::string> lines;
    for (const auto& id : ids) lines.push_back(st.title(id));
    return numbered_block(lines);
  };

  switch (form) {
    case InterestForm::RecentItems:
      p.rendered_text = st.history_block();
      p.items_used = st.recent_ids;
      break;
    case InterestForm::PersonalOfRecent:
      p.rendered_text = templates::render("interest_personal_header", vocab) + "\n" +
                        personal_lines(st.recent_ids);
      p.items_used = st.recent_ids;
      break;
    case InterestForm::RecentWithPersonal:
      p.rendered_text = st.history_block() + "\n\n" +
                        templates::render("interest_personal_header", vocab) + "\n" +
                        personal_lines(st.recent_ids);
      p.items_used = st.recent_ids;
      break;
    case InterestForm::RecentWithShortSummary: {
      const std::string summary =
          st.complete(recent_summary_prompt(st.recent_titles, vocab, ctx.window));
      p.rendered_text = templates::render("interest_summary_header", vocab) + "\n" + summary +
                        "\n\n" + st.history_block();
      p.items_used = st.recent_ids;
      break;
    }
    case InterestForm::RetrievedItems: {
      auto ids = st.retrieve(st.retrieval_memory(), st.recent_titles_query(), nullptr);
      p.rendered_text =
          templates::render("interest_retrieved_header", vocab) + "\n" + title_lines(ids);
      p.items_used = ids;
      break;
    }
    case InterestForm::RetrievedPersonal: {
      auto ids = st.retrieve(*ctx.personal, st.recent_titles_query(), nullptr);
      p.rendered_text = templates::render("interest_retrieved_personal_header", vocab) + "\n" +
                        personal_lines(ids);
      p.items_used = ids;
      break;
    }
    case InterestForm::RetrievedPersonalSummary: {
      auto ids = st.retrieve(*ctx.personal, st.recent_titles_query(), nullptr);
      std::vector<std::string> notes;
      for (const auto& id : ids) notes.push_back("- " + st.personal_text(id));
      const std::string summary = st.complete(
          templates::render("request_retrieved_summary", vocab, {{"notes", join(notes, "\n")}}));
      p.rendered_text =
          templates::render("interest_retrieved_summary_header", vocab) + "\n" + summary;
      p.items_used = ids;
      break;
    }
    case InterestForm::RecentAndRetrieved: {
      const std::set<std::string> recent(st.recent_ids.begin(), st.recent_ids.end());
      auto ids = st.retrieve(st.retrieval_memory(), st.recent_titles_query(), &recent);
      p.rendered_text = st.history_block();
      if (!ids.empty()) {
        p.rendered_text += "\n\n" + templates::render("interest_retrieved_header", vocab) +
                           "\n" + title_lines(ids);
      }
      p.items_used = st.recent_ids;
      p.items_used.insert(p.items_used.end(), ids.begin(), ids.end());
      break;
    }
    case InterestForm::RetrievedPersonalProfileQuery: {
      auto profile =
          memory_reflect(*ctx.personal, instance.user_id, *st.llm, vocab, *ctx.cache);
      auto query = make_query(QueryMode::LongAndShort, st.recent_titles, profile.profile_text,
                              *st.llm, *ctx.embedder, vocab, ctx.window);
      auto ids = st.retrieve(*ctx.personal, query.embedding, nullptr);
      p.rendered_text = templates::render("interest_retrieved_personal_header", vocab) + "\n" +
                        personal_lines(ids);
      p.items_used = ids;
      break;
    }
    case InterestForm::RecentWithLongTermProfile: {
      auto profile =
          memory_reflect(*ctx.personal, instance.user_id, *st.llm, vocab, *ctx.cache);
      p.rendered_text = st.history_block() + "\n\n" +
                        templates::render("interest_profile_header", vocab) + "\n" +
                        profile.profile_text;
      p.items_used = st.recent_ids;
      break;
    }
  }
  p.llm_calls = counter ? counter->calls() : 0;
  return p;
}

}  // namespace recharness::interest
