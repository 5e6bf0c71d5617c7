#include "recharness/candidates.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <map>
#include <set>

#include "recharness/common.hpp"

namespace recharness::candidates {

CandidateSet build_random_candidates(const corpus::EvalInstance& instance,
                                     const std::vector<std::string>& item_pool, std::size_t k,
                                     std::uint64_t seed) {
  if (k == 0) throw Error("candidate set size must be >= 1");
  const std::string& gt = instance.ground_truth;
  std::set<std::string> seen{gt};
  for (const auto& ev : instance.prefix) seen.insert(ev.item_id);

  std::set<std::string> unique(item_pool.begin(), item_pool.end());
  std::vector<std::string> pool;
  pool.reserve(unique.size());
  for (const auto& id : unique) {
    if (!seen.count(id)) pool.push_back(id);
  }
  if (pool.size() < k - 1) {
    throw Error("user " + instance.user_id + ": " + std::to_string(pool.size()) +
                " unseen items available, need " + std::to_string(k - 1) + " negatives");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < k - 1; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k - 1);
  const std::size_t pos = rng.uniform_index(k);
  pool.insert(pool.begin() + static_cast<std::ptrdiff_t>(pos), gt);

  CandidateSet set;
  set.items = std::move(pool);
  set.ground_truth_index = pos;
  set.seed = seed;
  return set;
}

CandidateSet build_recalled_candidates(const baselines::Model& model,
                                       const corpus::EvalInstance& instance, std::size_t k,
                                       std::vector<std::string>* warnings) {
  std::set<std::string> exclude;
  for (const auto& ev : instance.prefix) exclude.insert(ev.item_id);
  CandidateSet set;
  set.items = baselines::recall_top_k(model, instance.user_id, k, exclude, warnings);
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    if (set.items[i] == instance.ground_truth) set.ground_truth_index = i;
  }
  return set;
}

IdentifierScheme parse_scheme(std::string_view name) {
  if (name == "description") return {SchemeKind::Description};
  if (name == "token" || name == "token-numeric" || name == "numeric") {
    return {SchemeKind::TokenNumeric};
  }
  if (name == "token-letters" || name == "letters") return {SchemeKind::TokenLetters};
  throw ConfigError("unknown identifier scheme '" + std::string(name) +
                    "' (expected description, token-numeric or token-letters)");
}

std::string_view scheme_name(const IdentifierScheme& scheme) {
  switch (scheme.kind) {
    case SchemeKind::Description: return "description";
    case SchemeKind::TokenNumeric: return "token-numeric";
    case SchemeKind::TokenLetters: return "token-letters";
  }
  return "description";
}

RenderedCandidates render_identifiers(const CandidateSet& set, const corpus::Catalog& catalog,
                                      const IdentifierScheme& scheme) {
  const std::size_t k = set.items.size();
  if (scheme.kind == SchemeKind::TokenLetters && k > 26) {
    throw Error("letter identifiers support at most 26 candidates, got " + std::to_string(k));
  }
  RenderedCandidates out;
  out.scheme = scheme;
  std::map<std::string, std::size_t> norm_count;
  for (const auto& id : set.items) {
    auto it = catalog.find(id);
    out.display_titles.push_back(it == catalog.end() ? id : it->second.title);
    ++norm_count[normalize_title(out.display_titles.back())];
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (norm_count[normalize_title(out.display_titles[i])] > 1) {
      out.display_titles[i] += " [" + set.items[i] + "]";
    }
    out.labels.push_back(scheme.kind == SchemeKind::TokenLetters
                             ? std::string(1, static_cast<char>('A' + i))
                             : std::to_string(i + 1));
    out.lines.push_back(out.labels[i] + ". " + out.display_titles[i]);
  }
  return out;
}

std::string GroundingReport::to_json() const {
  nlohmann::ordered_json j;
  j["ranking"] = ranking;
  j["covered"] = covered;
  j["unmatched_lines"] = unmatched_lines;
  j["duplicates_dropped"] = duplicates_dropped;
  return j.dump();
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_ascii_punct(char c) {
  return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c));
}

// Drops one wrapping layer of straight or curly quotes.
std::string strip_quotes(std::string s) {
  static const std::vector<std::string> quotes = {"\"", "'", "\xE2\x80\x9C", "\xE2\x80\x9D",
                                                  "\xE2\x80\x98", "\xE2\x80\x99", "`"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    for (const auto& q : quotes) {
      if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) {
        s = trim(s.substr(q.size()));
        changed = true;
      }
    }
    for (const auto& q : {"\"", "\xE2\x80\x9D", "\xE2\x80\x9C", "`"}) {
      std::string_view qv(q);
      if (s.size() >= qv.size() && s.compare(s.size() - qv.size(), qv.size(), qv) == 0) {
        s = trim(s.substr(0, s.size() - qv.size()));
        changed = true;
      }
    }
  }
  return s;
}

std::string remove_all(std::string s, std::string_view what) {
  std::size_t pos = 0;
  while ((pos = s.find(what, pos)) != std::string::npos) s.erase(pos, what.size());
  return s;
}

std::string strip_bullets(std::string s) {
  for (;;) {
    s = trim(s);
    if (s.empty()) return s;
    if (s[0] == '-' || s[0] == '*' || s[0] == '+' || s[0] == '>' || s[0] == '#') {
      s.erase(0, 1);
      continue;
    }
    if (s.compare(0, 3, "\xE2\x80\xA2") == 0) {  // bullet
      s.erase(0, 3);
      continue;
    }
    return s;
  }
}

// Removes "1.", "1)", "(1)", "[1]", "1:" style numbering. Returns s unchanged
// when no numbering is present.
std::string strip_numbering(const std::string& s) {
  std::size_t i = 0;
  const bool open = i < s.size() && (s[i] == '(' || s[i] == '[');
  if (open) ++i;
  const std::size_t digits_start = i;
  while (i < s.size() && is_digit(s[i]) && i - digits_start < 3) ++i;
  if (i == digits_start || (i < s.size() && is_digit(s[i]))) return s;
  if (i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':' || s[i] == ']')) {
    return trim(s.substr(i + 1));
  }
  if (open) return s;
  // "1 - Title"
  std::size_t j = i;
  while (j < s.size() && s[j] == ' ') ++j;
  if (j > i && j < s.size() && s[j] == '-') return trim(s.substr(j + 1));
  return s;
}

std::vector<std::string> tokens_of(const std::string& normalized) {
  std::vector<std::string> out;
  for (auto& t : split(normalized, ' ')) {
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct TitleIndex {
  std::vector<std::string> norm;
  std::vector<std::set<std::string>> tokens;

  explicit TitleIndex(const RenderedCandidates& r) {
    for (const auto& t : r.display_titles) {
      norm.push_back(normalize_title(t));
      auto toks = tokens_of(norm.back());
      tokens.emplace_back(toks.begin(), toks.end());
    }
  }

  std::optional<std::size_t> match(const std::string& text) const {
    const std::string line = normalize_title(text);
    if (line.empty()) return std::nullopt;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      if (norm[i] == line) return i;
    }
    const std::string padded = " " + line + " ";
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      if (norm[i].empty()) continue;
      if (padded.find(" " + norm[i] + " ") != std::string::npos &&
          (!best || norm[i].size() > norm[*best].size())) {
        best = i;
      }
    }
    if (best) return best;
    const auto line_tokens_v = tokens_of(line);
    const std::set<std::string> line_tokens(line_tokens_v.begin(), line_tokens_v.end());
    double best_score = 0.0;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      const double s = jaccard(line_tokens, tokens[i]);
      if (s >= kJaccardThreshold && s > best_score) {
        best_score = s;
        best = i;
      }
    }
    return best;
  }
};

// Leading label followed by end of line or punctuation.
std::optional<std::size_t> match_label(const std::string& s, const RenderedCandidates& r) {
  std::string t = s;
  if (!t.empty() && (t[0] == '(' || t[0] == '[')) t.erase(0, 1);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    const auto& label = r.labels[i];
    if (t.size() < label.size()) continue;
    bool same = true;
    for (std::size_t c = 0; c < label.size(); ++c) {
      if (std::toupper(static_cast<unsigned char>(t[c])) != label[c]) same = false;
    }
    if (!same) continue;
    if (t.size() > label.size()) {
      const char next = t[label.size()];
      if (!is_ascii_punct(next)) continue;
    }
    if (!best || label.size() > r.labels[*best].size()) best = i;
  }
  return best;
}

}  // namespace

std::string normalize_title(std::string_view text) {
  std::string s = to_lower_ascii(trim(text));
  // Trailing "(YYYY)".
  if (s.size() >= 6 && s.back() == ')') {
    const std::size_t open = s.size() - 6;
    if (s[open] == '(' && std::all_of(s.begin() + static_cast<std::ptrdiff_t>(open) + 1,
                                      s.end() - 1, is_digit)) {
      s.erase(open);
    }
  }
  std::string out;
  bool space = false;
  for (char c : s) {
    if (is_ascii_punct(c) || std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string strip_decorations(std::string_view line) {
  std::string s = trim(line);
  s = remove_all(std::move(s), "**");
  s = remove_all(std::move(s), "__");
  s = strip_bullets(std::move(s));
  s = strip_numbering(s);
  s = strip_bullets(std::move(s));
  return strip_quotes(std::move(s));
}

GroundingReport ground_output(std::string_view raw_text, const RenderedCandidates& rendered,
                              std::optional<std::size_t> ground_truth_index) {
  GroundingReport report;
  const TitleIndex index(rendered);
  std::vector<bool> taken(rendered.lines.size(), false);

  for (const auto& raw : split_lines(raw_text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::string stripped = strip_decorations(line);
    std::optional<std::size_t> hit;
    if (rendered.scheme.is_token()) {
      std::string bare = strip_quotes(strip_bullets(remove_all(line, "**")));
      if (rendered.scheme.kind == SchemeKind::TokenLetters) hit = match_label(stripped, rendered);
      if (!hit) hit = match_label(bare, rendered);
    }
    if (!hit) hit = index.match(stripped);
    if (!hit && stripped != line) hit = index.match(line);
    if (!hit) {
      report.unmatched_lines.push_back(raw);
      continue;
    }
    if (taken[*hit]) {
      ++report.duplicates_dropped;
      continue;
    }
    taken[*hit] = true;
    report.ranking.push_back(*hit);
  }
  report.covered = ground_truth_index && *ground_truth_index < taken.size() &&
                   taken[*ground_truth_index];
  return report;
}

}  // namespace recharness::candidates
