#include "recharness/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <json.hpp>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

#include "recharness/common.hpp"

namespace recharness::corpus {

using ojson = nlohmann::ordered_json;

const std::string* ItemRecord::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace {

std::vector<std::string> split_double_colon(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find("::", start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 2;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

[[noreturn]] void fail_line(const std::string& file, std::size_t line_no,
                            const std::string& what) {
  throw Error(file + ":" + std::to_string(line_no) + ": " + what);
}

void check_rating(double r, const std::string& file, std::size_t line_no) {
  if (!(r >= 1.0 && r <= 5.0)) {
    fail_line(file, line_no, "rating outside [1,5]: " + std::to_string(r));
  }
}

std::string json_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& e : v) {
      std::string t = trim(json_text(e));
      if (!t.empty()) parts.push_back(t);
    }
    return join(parts, ", ");
  }
  if (v.is_number()) return v.dump();
  return {};
}

bool event_less(const Interaction& a, const Interaction& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.item_id < b.item_id;
}

}  // namespace

Interaction parse_movielens_rating(const std::string& raw, std::size_t line_no) {
  const std::string line = trim(raw);
  auto f = split_double_colon(line);
  if (f.size() != 4) fail_line("ratings", line_no, "expected 4 '::' fields");
  Interaction it;
  it.user_id = f[0];
  it.item_id = f[1];
  double rating = 0;
  if (f[0].empty() || f[1].empty() || !parse_number(std::string_view(f[2]), rating)) {
    fail_line("ratings", line_no, "malformed line '" + line + "'");
  }
  check_rating(rating, "ratings", line_no);
  it.rating = rating;
  if (!parse_number(std::string_view(f[3]), it.timestamp) || it.timestamp < 0) {
    fail_line("ratings", line_no, "malformed timestamp '" + f[3] + "'");
  }
  return it;
}

ItemRecord parse_movielens_movie(const std::string& raw, std::size_t line_no) {
  const std::string line = latin1_tolerant_utf8(trim(raw));
  auto f = split_double_colon(line);
  if (f.size() != 3 || f[0].empty() || trim(f[1]).empty()) {
    fail_line("movies", line_no, "expected 'MovieID::Title::Genres'");
  }
  ItemRecord rec;
  rec.item_id = f[0];
  rec.title = trim(f[1]);
  static const std::regex kYear(R"(\((\d{4})\)\s*$)");
  std::smatch m;
  if (std::regex_search(rec.title, m, kYear)) {
    rec.attributes.emplace_back("year", m[1].str());
  }
  std::string genres = trim(f[2]);
  if (!genres.empty()) {
    std::string pretty;
    for (char c : genres) {
      if (c == '|') {
        pretty += ", ";
      } else {
        pretty.push_back(c);
      }
    }
    rec.attributes.emplace_back("genre", pretty);
  }
  return rec;
}

LoadResult load_movielens(const std::string& ratings_path,
                          const std::string& movies_path) {
  LoadResult out;
  {
    std::istringstream in(read_file(movies_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      ItemRecord rec = parse_movielens_movie(line, line_no);
      std::string id = rec.item_id;
      if (!out.catalog.emplace(id, std::move(rec)).second) {
        out.warnings.push_back("movies:" + std::to_string(line_no) +
                               ": duplicate movie id " + id + " (kept first)");
      }
    }
  }
  std::istringstream in(read_file(ratings_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.interactions.push_back(parse_movielens_rating(line, line_no));
  }
  return out;
}

LoadResult load_amazon_books(const std::string& reviews_path,
                             const std::string& meta_path) {
  LoadResult out;
  std::set<std::string> seen_asin;
  std::set<std::string> dropped;
  {
    std::istringstream in(read_file(meta_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail_line(meta_path, line_no, std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object() || !j.contains("asin") || !j["asin"].is_string()) {
        fail_line(meta_path, line_no, "missing string field 'asin'");
      }
      std::string asin = j["asin"].get<std::string>();
      if (!seen_asin.insert(asin).second) {
        out.warnings.push_back(meta_path + ":" + std::to_string(line_no) +
                               ": duplicate asin " + asin + " (kept first)");
        continue;
      }
      ItemRecord rec;
      rec.item_id = asin;
      rec.title = j.contains("title") ? trim(json_text(j["title"])) : "";
      std::string description =
          j.contains("description") ? trim(json_text(j["description"])) : "";
      if (rec.title.empty() || description.empty()) {
        dropped.insert(asin);
        continue;
      }
      rec.description = description;
      for (const char* key : {"category", "brand", "price"}) {
        if (!j.contains(key)) continue;
        std::string v = trim(json_text(j[key]));
        if (v.empty()) continue;
        rec.attributes.emplace_back(key == std::string("category") ? "categories" : key, v);
      }
      out.catalog.emplace(asin, std::move(rec));
    }
  }
  if (!dropped.empty()) {
    out.warnings.push_back("dropped " + std::to_string(dropped.size()) +
                           " items without title or description");
  }
  std::istringstream in(read_file(reviews_path));
  std::string line;
  std::size_t line_no = 0;
  std::size_t orphan = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_line(reviews_path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("reviewerID") || !j["reviewerID"].is_string() ||
        !j.contains("asin") || !j["asin"].is_string() ||
        !j.contains("unixReviewTime") || !j["unixReviewTime"].is_number_integer()) {
      fail_line(reviews_path, line_no,
                "expected reviewerID, asin and integer unixReviewTime");
    }
    Interaction it;
    it.user_id = j["reviewerID"].get<std::string>();
    it.item_id = j["asin"].get<std::string>();
    it.timestamp = j["unixReviewTime"].get<std::int64_t>();
    if (it.timestamp < 0) fail_line(reviews_path, line_no, "negative timestamp");
    if (j.contains("overall") && !j["overall"].is_null()) {
      if (!j["overall"].is_number()) fail_line(reviews_path, line_no, "non-numeric overall");
      double r = j["overall"].get<double>();
      check_rating(r, reviews_path, line_no);
      it.rating = r;
    }
    if (!out.catalog.count(it.item_id)) {
      ++orphan;
      continue;
    }
    out.interactions.push_back(std::move(it));
  }
  if (orphan) {
    out.warnings.push_back("excluded " + std::to_string(orphan) +
                           " reviews of items missing from the catalog");
  }
  return out;
}

std::vector<Interaction> filter_k_core(const std::vector<Interaction>& interactions,
                                       std::size_t min_user_interactions,
                                       std::size_t min_item_interactions) {
  std::vector<char> alive(interactions.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> users;
    std::unordered_map<std::string, std::size_t> items;
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      ++users[interactions[i].user_id];
      ++items[interactions[i].item_id];
    }
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      if (!alive[i]) continue;
      if (users[interactions[i].user_id] < min_user_interactions ||
          items[interactions[i].item_id] < min_item_interactions) {
        alive[i] = 0;
        changed = true;
      }
    }
  }
  std::vector<Interaction> out;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    if (alive[i]) out.push_back(interactions[i]);
  }
  return out;
}

std::vector<Interaction> sort_history(std::vector<Interaction> events) {
  std::stable_sort(events.begin(), events.end(), event_less);
  auto last = std::unique(events.begin(), events.end(),
                          [](const Interaction& a, const Interaction& b) {
                            return a.timestamp == b.timestamp && a.item_id == b.item_id;
                          });
  events.erase(last, events.end());
  return events;
}

Histories build_histories(const std::vector<Interaction>& interactions) {
  std::map<std::string, std::vector<Interaction>> grouped;
  for (const auto& it : interactions) grouped[it.user_id].push_back(it);
  Histories out;
  for (auto& [user, events] : grouped) {
    out.emplace(user, UserHistory{user, sort_history(std::move(events))});
  }
  return out;
}

EvalInstance leave_one_out(const UserHistory& history) {
  if (history.interactions.size() < 2) {
    throw Error("leave_one_out: user " + history.user_id +
                " needs at least 2 interactions");
  }
  EvalInstance inst;
  inst.user_id = history.user_id;
  inst.prefix.assign(history.interactions.begin(), history.interactions.end() - 1);
  inst.ground_truth = history.interactions.back().item_id;
  return inst;
}

std::vector<EvalInstance> sample_users(const Histories& histories, std::size_t n,
                                       std::uint64_t seed,
                                       std::size_t min_history_len) {
  std::vector<const UserHistory*> eligible;
  for (const auto& [user, h] : histories) {
    if (h.interactions.size() >= std::max<std::size_t>(min_history_len, 2)) {
      eligible.push_back(&h);
    }
  }
  if (n > eligible.size()) {
    throw Error("sample_users: requested " + std::to_string(n) + " users but only " +
                std::to_string(eligible.size()) + " of " +
                std::to_string(histories.size()) + " have >= " +
                std::to_string(min_history_len) + " interactions");
  }
  Rng rng(seed);
  // Partial Fisher-Yates over the user_id-ordered eligible list.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.uniform_index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<EvalInstance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(leave_one_out(*eligible[i]));
  return out;
}

std::string SkipReport::to_text() const {
  std::ostringstream ss;
  ss << "skipped " << skipped << "\n";
  for (const auto& r : reasons) ss << r << "\n";
  return ss.str();
}

double default_ctr_threshold(std::string_view dataset_kind) {
  if (dataset_kind == "amazon_books" || dataset_kind == "books") return 5.0;
  return 4.0;
}

CtrDataset ctr_split(const std::vector<Interaction>& interactions,
                     const Histories& histories, std::size_t latest_n,
                     std::array<std::size_t, 3> ratio, double threshold,
                     std::size_t history_len) {
  (void)interactions;
  std::vector<const Interaction*> all;
  for (const auto& [user, h] : histories) {
    for (const auto& it : h.interactions) all.push_back(&it);
  }
  if (latest_n > all.size()) {
    throw Error("ctr_split: latest_n=" + std::to_string(latest_n) + " exceeds " +
                std::to_string(all.size()) + " interactions");
  }
  const std::size_t ratio_sum = ratio[0] + ratio[1] + ratio[2];
  if (ratio_sum == 0) throw Error("ctr_split: ratio sums to zero");
  std::sort(all.begin(), all.end(), [](const Interaction* a, const Interaction* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    if (a->user_id != b->user_id) return a->user_id < b->user_id;
    return a->item_id < b->item_id;
  });
  std::vector<const Interaction*> window(all.end() - static_cast<std::ptrdiff_t>(latest_n),
                                         all.end());
  CtrDataset ds;
  ds.threshold = threshold;
  ds.history_len = history_len;
  const std::size_t n_train = latest_n * ratio[0] / ratio_sum;
  const std::size_t n_valid = latest_n * ratio[1] / ratio_sum;
  ds.window_sizes = {n_train, n_valid, latest_n - n_train - n_valid};

  for (std::size_t i = 0; i < window.size(); ++i) {
    const Interaction& target = *window[i];
    const auto& events = histories.at(target.user_id).interactions;
    auto end = std::lower_bound(
        events.begin(), events.end(), target.timestamp,
        [](const Interaction& e, std::int64_t ts) { return e.timestamp < ts; });
    const auto available = static_cast<std::size_t>(end - events.begin());
    if (available == 0) {
      ++ds.skips.skipped;
      ds.skips.reasons.push_back("user " + target.user_id + " item " + target.item_id +
                                 " ts " + std::to_string(target.timestamp) +
                                 ": no preceding history");
      continue;
    }
    CtrSelection sel;
    sel.target = target;
    const std::size_t take = std::min(available, history_len);
    sel.context.assign(end - static_cast<std::ptrdiff_t>(take), end);
    sel.label = !target.rating.has_value() || *target.rating >= threshold;
    if (i < n_train) {
      ds.train.push_back(std::move(sel));
    } else if (i < n_train + n_valid) {
      ds.valid.push_back(std::move(sel));
    } else {
      ds.test.push_back(std::move(sel));
    }
  }
  return ds;
}

std::string interactions_to_jsonl(const std::vector<Interaction>& interactions) {
  std::string out;
  for (const auto& it : interactions) {
    ojson j;
    j["user_id"] = it.user_id;
    j["item_id"] = it.item_id;
    j["rating"] = it.rating ? ojson(*it.rating) : ojson(nullptr);
    j["timestamp"] = it.timestamp;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Interaction> interactions_from_jsonl(const std::string& text) {
  std::vector<Interaction> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Interaction it;
      it.user_id = j.at("user_id").get<std::string>();
      it.item_id = j.at("item_id").get<std::string>();
      if (!j.at("rating").is_null()) it.rating = j.at("rating").get<double>();
      it.timestamp = j.at("timestamp").get<std::int64_t>();
      out.push_back(std::move(it));
    } catch (const nlohmann::json::exception& e) {
      throw Error("interactions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string catalog_to_jsonl(const Catalog& catalog) {
  std::string out;
  for (const auto& [id, rec] : catalog) {
    ojson j;
    j["item_id"] = rec.item_id;
    j["title"] = rec.title;
    ojson attrs = ojson::array();
    for (const auto& [k, v] : rec.attributes) attrs.push_back(ojson::array({k, v}));
    j["attributes"] = attrs;
    j["description"] = rec.description ? ojson(*rec.description) : ojson(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Catalog catalog_from_jsonl(const std::string& text) {
  Catalog out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ItemRecord rec;
      rec.item_id = j.at("item_id").get<std::string>();
      rec.title = j.at("title").get<std::string>();
      for (const auto& kv : j.at("attributes")) {
        rec.attributes.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
      }
      if (!j.at("description").is_null()) rec.description = j.at("description").get<std::string>();
      std::string id = rec.item_id;
      out.emplace(id, std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw Error("catalog line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::size_t apply_descriptions_jsonl(Catalog& catalog, const std::string& text) {
  std::size_t applied = 0;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto it = catalog.find(j.at("item_id").get<std::string>());
      if (it == catalog.end()) continue;
      std::string d = trim(j.at("description").get<std::string>());
      if (d.empty()) continue;
      it->second.description = d;
      ++applied;
    } catch (const nlohmann::json::exception& e) {
      throw Error("descriptions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return applied;
}

std::string corpus_hash(const std::vector<Interaction>& interactions,
                        const Catalog& catalog) {
  std::vector<Interaction> sorted = interactions;
  std::sort(sorted.begin(), sorted.end(), [](const Interaction& a, const Interaction& b) {
    const double ra = a.rating.value_or(-1.0);
    const double rb = b.rating.value_or(-1.0);
    return std::tie(a.user_id, a.timestamp, a.item_id, ra) <
           std::tie(b.user_id, b.timestamp, b.item_id, rb);
  });
  return sha256_hex(interactions_to_jsonl(sorted) + catalog_to_jsonl(catalog));
}

}  // namespace recharness::corpus
