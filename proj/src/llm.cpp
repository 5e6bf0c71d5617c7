#include "recharness/llm.hpp"

#include "recharness/common.hpp"

namespace recharness::llm {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw Error("unknown message role: " + std::string(name));
}

std::string_view mock_kind_name(MockKind kind) {
  switch (kind) {
    case MockKind::Oracle: return "oracle";
    case MockKind::Echo: return "echo";
    case MockKind::Random: return "random";
    case MockKind::Truncate: return "truncate";
    case MockKind::ConstantAnswer: return "constant";
  }
  return "echo";
}

MockKind parse_mock_kind(std::string_view name) {
  for (MockKind k : {MockKind::Oracle, MockKind::Echo, MockKind::Random, MockKind::Truncate,
                     MockKind::ConstantAnswer}) {
    if (mock_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown mock kind: " + std::string(name));
}

std::string last_user_content(std::span<const Message> messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return {};
}

std::optional<std::vector<std::string>> extract_candidate_block(std::string_view prompt) {
  const auto lines = split_lines(prompt);
  std::optional<std::size_t> header;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (!t.empty() && t.back() == ':' &&
        to_lower_ascii(t).find("candidate") != std::string::npos) {
      header = i;
    }
  }
  if (!header) return std::nullopt;
  std::vector<std::string> block;
  for (std::size_t i = *header + 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) break;
    block.push_back(lines[i]);
  }
  if (block.empty()) return std::nullopt;
  return block;
}

std::string CountingModel::complete(std::span<const Message> messages,
                                    const OracleHint& hint) {
  ++calls_;
  return inner_.complete(messages, hint);
}

namespace {

class MockModel final : public LanguageModel {
 public:
  MockModel(MockKind kind, MockParams params) : kind_(kind), params_(std::move(params)) {}

  std::string complete(std::span<const Message> messages, const OracleHint& hint) override {
    if (messages.empty()) throw Error("mock llm: empty message list");
    const std::string prompt = last_user_content(messages);
    if (kind_ == MockKind::ConstantAnswer) return params_.text;
    const auto block = extract_candidate_block(prompt);
    if (!block) return plain_answer(prompt, hint);

    std::vector<std::string> lines = *block;
    switch (kind_) {
      case MockKind::Echo:
        break;
      case MockKind::Oracle:
        if (hint.ground_truth_index && *hint.ground_truth_index < lines.size()) {
          std::string gt = lines[*hint.ground_truth_index];
          lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(*hint.ground_truth_index));
          lines.insert(lines.begin(), gt);
        }
        break;
      case MockKind::Random: {
        Rng rng(mix_seed(params_.seed, fnv1a64(prompt)));
        rng.shuffle(lines);
        break;
      }
      case MockKind::Truncate:
        lines.resize(lines.size() > params_.drop ? lines.size() - params_.drop : 0);
        break;
      case MockKind::ConstantAnswer:
        break;
    }
    return join(lines, "\n");
  }

  std::string describe() const override {
    std::string d = "mock:" + std::string(mock_kind_name(kind_));
    switch (kind_) {
      case MockKind::Random: d += ":seed=" + std::to_string(params_.seed); break;
      case MockKind::Truncate: d += ":drop=" + std::to_string(params_.drop); break;
      case MockKind::ConstantAnswer: d += ":text=" + params_.text; break;
      default: break;
    }
    return d;
  }

 private:
  std::string plain_answer(const std::string& prompt, const OracleHint& hint) const {
    switch (kind_) {
      case MockKind::Random:
        return (mix_seed(params_.seed, fnv1a64(prompt)) & 1ULL) ? "Yes." : "No.";
      case MockKind::Oracle:
        if (hint.label) return *hint.label ? "Yes." : "No.";
        return prompt;
      default:
        return prompt;
    }
  }

  MockKind kind_;
  MockParams params_;
};

}  // namespace

std::unique_ptr<LanguageModel> make_mock(MockKind kind, MockParams params) {
  return std::make_unique<MockModel>(kind, std::move(params));
}

}  // namespace recharness::llm
