#pragma once

#include <optional>
#include <string>
#include <vector>

#include "recharness/candidates.hpp"
#include "recharness/corpus.hpp"
#include "recharness/embedding.hpp"
#include "recharness/interest.hpp"
#include "recharness/llm.hpp"
#include "recharness/templates.hpp"

namespace recharness::prompting {

enum class IclMode { None, Self, Others };

IclMode parse_icl_mode(std::string_view name);
std::string_view icl_mode_name(IclMode mode);

struct PromptConfig {
  bool recency_focused = true;
  bool role_prompt = false;
  bool cot_step_by_step = true;
  bool least_to_most = false;
  IclMode icl = IclMode::None;
  std::size_t history_len = 10;
  candidates::IdentifierScheme scheme;
  templates::Domain domain = templates::Domain::Movie;

  /// Canonical JSON (fixed key order) and its SHA-256.
  std::string to_json() const;
  std::string hash() const;
  /// LLM calls per ranked instance, excluding interest-form calls.
  std::size_t calls_per_instance() const { return least_to_most ? 2 : 1; }
};

/// Placeholder in the second least-to-most turn, replaced by the first
/// turn's answer before the call.
inline constexpr std::string_view kStageOneSlot = "{stage1_answer}";

struct RenderedPrompt {
  std::optional<std::string> system;
  std::vector<std::string> user_turns;
  std::string config_hash;
  std::string instance_id;

  std::vector<llm::Message> messages(std::size_t turn) const;
  /// One JSON object (single line) for audit logs.
  std::string to_json() const;
};

struct Demonstration {
  std::string user_id;
  std::vector<std::string> history_titles;  // oldest first
  std::string answer_title;
};

/// Self: the instance's own prefix shifted by one. Others: the pool user
/// whose last-`history_len` titles embed closest (inner product) to the
/// target's, ties by user_id.
Demonstration select_demonstration(IclMode mode, const corpus::EvalInstance& target,
                                   const std::vector<corpus::EvalInstance>& pool,
                                   const corpus::Catalog& catalog,
                                   const llm::Embedder* embedder, std::size_t history_len = 10);

RenderedPrompt render_ranking_prompt(const interest::InterestProfile& profile,
                                     const candidates::RenderedCandidates& candidates,
                                     const PromptConfig& config,
                                     const std::optional<Demonstration>& demo = std::nullopt,
                                     const std::string& instance_id = "");

/// Second least-to-most turn with the first answer substituted.
std::string fill_stage_one(const std::string& turn, const std::string& stage_one_answer);

enum class CtrStyle { Implicit, Explicit, Hybrid, Cot };

CtrStyle parse_ctr_style(std::string_view name);
std::string_view ctr_style_name(CtrStyle style);
inline constexpr CtrStyle kAllCtrStyles[] = {CtrStyle::Implicit, CtrStyle::Explicit,
                                             CtrStyle::Hybrid, CtrStyle::Cot};

struct CtrRendered {
  std::string instruction;
  std::string input;
  /// Some context item had no rating.
  bool missing_ratings = false;

  std::string text() const { return instruction + "\n" + input; }
};

CtrRendered render_ctr_parts(const corpus::CtrSelection& sample, CtrStyle style,
                             const corpus::Catalog& catalog, const templates::Vocabulary& vocab,
                             double threshold);

RenderedPrompt render_ctr_prompt(const corpus::CtrSelection& sample, CtrStyle style,
                                 const corpus::Catalog& catalog,
                                 const templates::Vocabulary& vocab, double threshold);

}  // namespace recharness::prompting
