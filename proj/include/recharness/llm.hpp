#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recharness::llm {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct Message {
  Role role = Role::User;
  std::string content;
};

/// Test-only metadata for the Oracle mock. Never rendered into a prompt and
/// never serialized.
struct OracleHint {
  std::optional<std::size_t> ground_truth_index;  // position in the presented block
  std::optional<bool> label;                      // CTR ground truth
};

/// Anything that answers a chat request. Implementations must be safe for
/// concurrent calls.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::string complete(std::span<const Message> messages,
                               const OracleHint& hint = {}) = 0;
  /// Stable description used in manifests and cache keys.
  virtual std::string describe() const = 0;
};

enum class MockKind { Oracle, Echo, Random, Truncate, ConstantAnswer };

std::string_view mock_kind_name(MockKind kind);
MockKind parse_mock_kind(std::string_view name);

struct MockParams {
  std::uint64_t seed = 0;  // Random
  std::size_t drop = 0;    // Truncate: number of trailing candidate lines dropped
  std::string text;        // ConstantAnswer
};

/// Deterministic offline models. Ranking prompts are recognised by their
/// candidate block; other prompts get a kind-specific plain answer (Echo and
/// Truncate echo the prompt, Random answers "Yes."/"No.", Oracle answers from
/// the CTR label hint).
std::unique_ptr<LanguageModel> make_mock(MockKind kind, MockParams params = {});

/// Candidate lines of a ranking prompt: the non-empty lines following the
/// last line that mentions "candidate" and ends with ':', up to the next
/// blank line. nullopt when the prompt has no such block.
std::optional<std::vector<std::string>> extract_candidate_block(std::string_view prompt);

/// Content of the last user message (empty when there is none).
std::string last_user_content(std::span<const Message> messages);

/// Forwards to another model and counts calls.
class CountingModel final : public LanguageModel {
 public:
  explicit CountingModel(LanguageModel& inner) : inner_(inner) {}
  std::string complete(std::span<const Message> messages,
                       const OracleHint& hint = {}) override;
  std::string describe() const override { return inner_.describe(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  LanguageModel& inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace recharness::llm
