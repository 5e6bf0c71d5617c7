#include "recharness/prompting.hpp"

#include <algorithm>
#include <json.hpp>

#include "recharness/common.hpp"

namespace recharness::prompting {

using ojson = nlohmann::ordered_json;

IclMode parse_icl_mode(std::string_view name) {
  if (name == "none") return IclMode::None;
  if (name == "self") return IclMode::Self;
  if (name == "others") return IclMode::Others;
  throw ConfigError("unknown icl mode '" + std::string(name) + "' (expected none, self, others)");
}

std::string_view icl_mode_name(IclMode mode) {
  switch (mode) {
    case IclMode::None: return "none";
    case IclMode::Self: return "self";
    case IclMode::Others: return "others";
  }
  return "none";
}

std::string PromptConfig::to_json() const {
  ojson j;
  j["recency_focused"] = recency_focused;
  j["role_prompt"] = role_prompt;
  j["cot_step_by_step"] = cot_step_by_step;
  j["least_to_most"] = least_to_most;
  j["icl"] = icl_mode_name(icl);
  j["history_len"] = history_len;
  j["scheme"] = candidates::scheme_name(scheme);
  j["domain"] = templates::domain_name(domain);
  return j.dump();
}

std::string PromptConfig::hash() const { return sha256_hex(to_json()); }

std::vector<llm::Message> RenderedPrompt::messages(std::size_t turn) const {
  std::vector<llm::Message> out;
  if (system) out.push_back({llm::Role::System, *system});
  out.push_back({llm::Role::User, user_turns.at(turn)});
  return out;
}

std::string RenderedPrompt::to_json() const {
  ojson j;
  j["instance_id"] = instance_id;
  j["config_hash"] = config_hash;
  j["system"] = system ? ojson(*system) : ojson(nullptr);
  j["user_turns"] = user_turns;
  return j.dump();
}

namespace {

std::vector<std::string> last_titles(const std::vector<corpus::Interaction>& events,
                                     const corpus::Catalog& catalog, std::size_t n) {
  const std::size_t start = events.size() > n ? events.size() - n : 0;
  std::vector<std::string> out;
  for (std::size_t i = start; i < events.size(); ++i) {
    out.push_back(interest::item_title(catalog, events[i].item_id));
  }
  return out;
}

}  // namespace

Demonstration select_demonstration(IclMode mode, const corpus::EvalInstance& target,
                                   const std::vector<corpus::EvalInstance>& pool,
                                   const corpus::Catalog& catalog,
                                   const llm::Embedder* embedder, std::size_t history_len) {
  if (mode == IclMode::None) throw Error("select_demonstration: icl mode is none");
  if (mode == IclMode::Self) {
    if (target.prefix.size() < 2) {
      throw Error("self demonstration needs a history of at least 2 items (user " +
                  target.user_id + " has " + std::to_string(target.prefix.size()) + ")");
    }
    std::vector<corpus::Interaction> shifted(target.prefix.begin(), target.prefix.end() - 1);
    return {target.user_id, last_titles(shifted, catalog, history_len),
            interest::item_title(catalog, target.prefix.back().item_id)};
  }
  if (!embedder) throw Error("others demonstration needs an embedder");
  const auto query = embedder->embed(join(last_titles(target.prefix, catalog, history_len), "\n"));
  const corpus::EvalInstance* best = nullptr;
  double best_score = 0.0;
  for (const auto& cand : pool) {
    if (cand.user_id == target.user_id || cand.prefix.empty()) continue;
    const double s = llm::inner_product(
        query, embedder->embed(join(last_titles(cand.prefix, catalog, history_len), "\n")));
    if (!best || s > best_score || (s == best_score && cand.user_id < best->user_id)) {
      best = &cand;
      best_score = s;
    }
  }
  if (!best) throw Error("others demonstration: pool has no user besides " + target.user_id);
  return {best->user_id, last_titles(best->prefix, catalog, history_len),
          interest::item_title(catalog, best->ground_truth)};
}

RenderedPrompt render_ranking_prompt(const interest::InterestProfile& profile,
                                     const candidates::RenderedCandidates& cands,
                                     const PromptConfig& config,
                                     const std::optional<Demonstration>& demo,
                                     const std::string& instance_id) {
  const auto vocab = templates::Vocabulary::for_domain(config.domain);
  const std::string k = std::to_string(cands.lines.size());

  std::vector<std::string> head;
  if (config.role_prompt) head.push_back(templates::render("rank_role", vocab));
  if (demo) {
    const std::string label = cands.scheme.kind == candidates::SchemeKind::TokenLetters ? "A" : "1";
    head.push_back(templates::render("rank_icl_header", vocab) + "\n" +
                   interest::numbered_block(demo->history_titles) + "\n" +
                   templates::render("rank_icl_answer", vocab,
                                     {{"answer", label + ". " + demo->answer_title}}));
  }

  std::vector<std::string> main = head;
  main.push_back(profile.rendered_text);
  if (config.least_to_most) {
    main.push_back(templates::render("rank_l2m_slot", vocab,
                                     {{"stage1_answer", std::string(kStageOneSlot)}}));
  }
  if (config.recency_focused) {
    main.push_back(templates::render("rank_recency", vocab, {{"latest", profile.latest_title}}));
  }
  main.push_back(templates::render("rank_candidates_header", vocab, {{"k", k}}) + "\n" +
                 join(cands.lines, "\n"));
  main.push_back(templates::render(
      cands.scheme.is_token() ? "rank_instruction_token" : "rank_instruction_description", vocab,
      {{"k", k}}));
  if (config.cot_step_by_step) main.push_back(templates::render("rank_cot", vocab));

  RenderedPrompt out;
  out.config_hash = config.hash();
  out.instance_id = instance_id;
  if (config.least_to_most) {
    std::vector<std::string> first = head;
    first.push_back(profile.rendered_text);
    first.push_back(templates::render("rank_l2m_request", vocab));
    out.user_turns.push_back(join(first, "\n\n"));
  }
  out.user_turns.push_back(join(main, "\n\n"));
  return out;
}

std::string fill_stage_one(const std::string& turn, const std::string& stage_one_answer) {
  const auto pos = turn.find(kStageOneSlot);
  if (pos == std::string::npos) return turn;
  std::string out = turn;
  out.replace(pos, kStageOneSlot.size(), trim(stage_one_answer));
  return out;
}

CtrStyle parse_ctr_style(std::string_view name) {
  if (name == "implicit") return CtrStyle::Implicit;
  if (name == "explicit") return CtrStyle::Explicit;
  if (name == "hybrid") return CtrStyle::Hybrid;
  if (name == "cot") return CtrStyle::Cot;
  throw ConfigError("unknown CTR prompt style '" + std::string(name) +
                    "' (expected implicit, explicit, hybrid, cot)");
}

std::string_view ctr_style_name(CtrStyle style) {
  switch (style) {
    case CtrStyle::Implicit: return "implicit";
    case CtrStyle::Explicit: return "explicit";
    case CtrStyle::Hybrid: return "hybrid";
    case CtrStyle::Cot: return "cot";
  }
  return "implicit";
}

namespace {

std::string quoted_list(const std::vector<std::string>& titles) {
  if (titles.empty()) return "None";
  std::vector<std::string> parts;
  for (const auto& t : titles) parts.push_back("\"" + t + "\"");
  return join(parts, ", ");
}

}  // namespace

CtrRendered render_ctr_parts(const corpus::CtrSelection& sample, CtrStyle style,
                             const corpus::Catalog& catalog, const templates::Vocabulary& vocab,
                             double threshold) {
  CtrRendered out;
  const std::string target = templates::render(
      "ctr_target", vocab, {{"title", interest::item_title(catalog, sample.target.item_id)}});
  std::vector<std::string> lines;
  if (style == CtrStyle::Implicit || style == CtrStyle::Cot) {
    std::vector<std::string> liked, disliked;
    for (const auto& ev : sample.context) {
      const auto title = interest::item_title(catalog, ev.item_id);
      if (!ev.rating) out.missing_ratings = true;
      (!ev.rating || *ev.rating >= threshold ? liked : disliked).push_back(title);
    }
    out.instruction = templates::render("ctr_implicit_instruction", vocab);
    lines.push_back(templates::render("ctr_preference", vocab, {{"list", quoted_list(liked)}}));
    lines.push_back(
        templates::render("ctr_unpreference", vocab, {{"list", quoted_list(disliked)}}));
  } else {
    std::vector<std::string> rated;
    for (const auto& ev : sample.context) {
      std::string entry = "\"" + interest::item_title(catalog, ev.item_id) + "\"";
      if (ev.rating) {
        entry += ": " + templates::format_number(*ev.rating);
      } else {
        out.missing_ratings = true;
      }
      rated.push_back(std::move(entry));
    }
    out.instruction = templates::render(
        style == CtrStyle::Explicit ? "ctr_explicit_instruction" : "ctr_hybrid_instruction", vocab,
        {{"threshold", templates::format_number(threshold)}});
    lines.push_back(templates::render("ctr_ratings", vocab,
                                      {{"list", rated.empty() ? "None" : join(rated, ", ")}}));
  }
  lines.push_back(target);
  if (style == CtrStyle::Cot) lines.push_back(templates::render("ctr_cot", vocab));
  out.input = join(lines, "\n");
  return out;
}

RenderedPrompt render_ctr_prompt(const corpus::CtrSelection& sample, CtrStyle style,
                                 const corpus::Catalog& catalog,
                                 const templates::Vocabulary& vocab, double threshold) {
  RenderedPrompt out;
  out.user_turns.push_back(render_ctr_parts(sample, style, catalog, vocab, threshold).text());
  ojson j;
  j["style"] = ctr_style_name(style);
  j["threshold"] = threshold;
  j["domain"] = vocab.item;
  out.config_hash = sha256_hex(j.dump());
  out.instance_id = sample.target.user_id + ":" + sample.target.item_id + ":" +
                    std::to_string(sample.target.timestamp);
  return out;
}

}  // namespace recharness::prompting
