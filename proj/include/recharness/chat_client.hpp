#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <semaphore>
#include <string>

#include "recharness/common.hpp"
#include "recharness/llm.hpp"

namespace recharness::llm {

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  /// Relative jitter: each delay is scaled by a factor in [1 - j, 1 + j].
  double jitter = 0.2;
};

struct EndpointConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
  int max_parallel = 4;
  std::optional<std::string> cache_dir;
  bool bypass_cache = false;
  std::optional<std::string> audit_log;
};

/// Raised when a request fails for good. `status` is the last HTTP status, or
/// 0 for transport failures.
class LlmError : public Error {
 public:
  LlmError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  int status_;
  int attempts_;
};

struct LlmExchange {
  std::vector<Message> request;
  std::string response;
  double latency_ms = 0.0;
  int attempts = 0;
  bool cached = false;
};

/// Result of one HTTP attempt.
struct HttpReply {
  int status = 0;  // 0: transport error
  std::string body;
  std::string error;
};

/// POSTs JSON to base_url + path, retrying transport errors, 429 and 5xx with
/// exponential backoff. Other 4xx fail immediately.
struct JsonPostResult {
  nlohmann::json body;
  int attempts = 0;
};
JsonPostResult post_json_with_retry(const std::string& base_url, const std::string& path,
                                    const nlohmann::json& payload,
                                    const std::string& api_key_env,
                                    std::chrono::milliseconds timeout,
                                    const RetryPolicy& retry, std::uint64_t jitter_seed);

/// Content-addressed response cache: one file per key under `dir`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

/// Append-only JSON Lines log; each record is flushed before append returns.
class AuditLog {
 public:
  explicit AuditLog(const std::string& path);
  void append(const nlohmann::json& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

nlohmann::json chat_request_body(const EndpointConfig& cfg, std::span<const Message> messages);

/// Chat-completions client. Safe for concurrent use; at most `max_parallel`
/// requests are in flight.
class ChatClient final : public LanguageModel {
 public:
  explicit ChatClient(EndpointConfig cfg);
  ~ChatClient() override;

  std::string complete(std::span<const Message> messages,
                       const OracleHint& hint = {}) override;
  LlmExchange exchange(std::span<const Message> messages);
  std::string describe() const override;

  std::string cache_key(std::span<const Message> messages) const;

 private:
  EndpointConfig cfg_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<AuditLog> audit_;
  std::atomic<std::uint64_t> request_counter_{0};
};

}  // namespace recharness::llm
