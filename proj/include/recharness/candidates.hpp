#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recharness/baselines.hpp"
#include "recharness/corpus.hpp"

namespace recharness::candidates {

struct CandidateSet {
  std::vector<std::string> items;  // item ids in presented order
  std::optional<std::size_t> ground_truth_index;
  std::uint64_t seed = 0;
};

/// K-1 unseen negatives drawn without replacement from `item_pool`, with the
/// ground truth inserted at a uniformly random position.
CandidateSet build_random_candidates(const corpus::EvalInstance& instance,
                                     const std::vector<std::string>& item_pool, std::size_t k,
                                     std::uint64_t seed);

/// The model's top-K unseen items. The ground truth index is set only when
/// the target was recalled.
CandidateSet build_recalled_candidates(const baselines::Model& model,
                                       const corpus::EvalInstance& instance, std::size_t k,
                                       std::vector<std::string>* warnings = nullptr);

enum class SchemeKind { Description, TokenNumeric, TokenLetters };

struct IdentifierScheme {
  SchemeKind kind = SchemeKind::Description;

  bool is_token() const { return kind != SchemeKind::Description; }
};

IdentifierScheme parse_scheme(std::string_view name);
std::string_view scheme_name(const IdentifierScheme& scheme);

struct RenderedCandidates {
  IdentifierScheme scheme;
  std::vector<std::string> labels;          // "1", "2", ... or "A", "B", ...
  std::vector<std::string> display_titles;  // titles, disambiguated on collision
  std::vector<std::string> lines;           // "<label>. <title>"
};

/// One line per candidate in set order. Titles that normalize to the same
/// text get " [item_id]" appended so lines stay distinct.
RenderedCandidates render_identifiers(const CandidateSet& set, const corpus::Catalog& catalog,
                                      const IdentifierScheme& scheme);

struct GroundingReport {
  std::vector<std::size_t> ranking;  // candidate indices, no repeats
  bool covered = false;
  std::vector<std::string> unmatched_lines;
  std::size_t duplicates_dropped = 0;

  std::string to_json() const;
};

/// Lowercase, drop a trailing "(YYYY)", punctuation to spaces, collapse runs
/// of whitespace.
std::string normalize_title(std::string_view text);

/// Removes leading list numbering, bullets, markdown emphasis and wrapping
/// quotes from one output line.
std::string strip_decorations(std::string_view line);

/// Parses raw LLM output back into a ranking over `rendered`. Token schemes
/// match a leading label and fall back to title matching; titles match by
/// exact normalized equality, then containment (longest contained title),
/// then token-set Jaccard >= 0.6 (highest score).
GroundingReport ground_output(std::string_view raw_text, const RenderedCandidates& rendered,
                              std::optional<std::size_t> ground_truth_index);

inline constexpr double kJaccardThreshold = 0.6;

}  // namespace recharness::candidates
