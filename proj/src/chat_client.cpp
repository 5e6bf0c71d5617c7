#include "recharness/chat_client.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace recharness::llm {

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  if (path_start == std::string::npos) {
    p.scheme_host_port = url;
  } else {
    p.scheme_host_port = url.substr(0, path_start);
    p.path_prefix = url.substr(path_start);
  }
  while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
  return p;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, int attempt, Rng& rng) {
  const double base = static_cast<double>(retry.backoff_base.count()) *
                      std::pow(retry.backoff_factor, attempt);
  const double scale = 1.0 + retry.jitter * (2.0 * rng.uniform01() - 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, base * scale)));
}

HttpReply post_once(const ParsedUrl& url, const std::string& path, const std::string& body,
                    const std::string& api_key, std::chrono::milliseconds timeout) {
  httplib::Client cli(url.scheme_host_port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = cli.Post(url.path_prefix + path, headers, body, "application/json");
  HttpReply reply;
  if (!res) {
    reply.error = httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  reply.body = res->body;
  return reply;
}

}  // namespace

JsonPostResult post_json_with_retry(const std::string& base_url, const std::string& path,
                                    const nlohmann::json& payload,
                                    const std::string& api_key_env,
                                    std::chrono::milliseconds timeout,
                                    const RetryPolicy& retry, std::uint64_t jitter_seed) {
  const ParsedUrl url = parse_base_url(base_url);
  std::string api_key;
  if (!api_key_env.empty()) {
    if (const char* v = std::getenv(api_key_env.c_str())) api_key = v;
  }
  const std::string body = payload.dump();
  Rng rng(jitter_seed);
  HttpReply last;
  int attempts = 0;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_delay(retry, attempt - 1, rng));
    ++attempts;
    last = post_once(url, path, body, api_key, timeout);
    if (last.status >= 200 && last.status < 300) {
      try {
        return {nlohmann::json::parse(last.body), attempts};
      } catch (const nlohmann::json::exception& e) {
        throw LlmError(std::string("malformed JSON response: ") + e.what(), last.status,
                       attempts);
      }
    }
    if (!retryable(last.status)) {
      throw LlmError("HTTP " + std::to_string(last.status) + ": " + last.body, last.status,
                     attempts);
    }
  }
  const std::string why = last.status == 0 ? "transport error: " + last.error
                                            : "HTTP " + std::to_string(last.status);
  throw LlmError("retries exhausted after " + std::to_string(attempts) + " attempts (" + why +
                     ")",
                 last.status, attempts);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto j = nlohmann::json::parse(read_file(path.string()));
  return j.at("response").get<std::string>();
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  std::lock_guard lock(mu_);
  const auto path = dir_ / (key + ".json");
  const auto tmp = dir_ / (key + ".json.tmp");
  nlohmann::ordered_json j;
  j["key"] = key;
  j["response"] = value;
  write_file(tmp.string(), j.dump());
  std::filesystem::rename(tmp, path);
}

AuditLog::AuditLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw Error("cannot open audit log: " + path);
}

void AuditLog::append(const nlohmann::json& record) {
  std::lock_guard lock(mu_);
  out_ << record.dump() << '\n';
  out_.flush();
}

nlohmann::json chat_request_body(const EndpointConfig& cfg, std::span<const Message> messages) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json jm;
    jm["role"] = std::string(role_name(m.role));
    jm["content"] = m.content;
    msgs.push_back(jm);
  }
  body["messages"] = msgs;
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  return nlohmann::json::parse(body.dump());
}

ChatClient::ChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.retry.max_retries < 0) throw ConfigError("llm.max_retries must be >= 0");
  if (cfg_.max_parallel < 1 || cfg_.max_parallel > 1024) {
    throw ConfigError("llm.max_parallel must be in [1, 1024]");
  }
  parse_base_url(cfg_.base_url);
  slots_ = std::make_unique<std::counting_semaphore<1024>>(cfg_.max_parallel);
  if (cfg_.cache_dir) cache_ = std::make_unique<ResponseCache>(*cfg_.cache_dir);
  if (cfg_.audit_log) audit_ = std::make_unique<AuditLog>(*cfg_.audit_log);
}

ChatClient::~ChatClient() = default;

std::string ChatClient::describe() const {
  return "endpoint:" + cfg_.base_url + ":" + cfg_.model;
}

std::string ChatClient::cache_key(std::span<const Message> messages) const {
  nlohmann::ordered_json k;
  k["endpoint"] = cfg_.base_url;
  k["request"] = chat_request_body(cfg_, messages);
  return sha256_hex(k.dump());
}

std::string ChatClient::complete(std::span<const Message> messages, const OracleHint&) {
  return exchange(messages).response;
}

LlmExchange ChatClient::exchange(std::span<const Message> messages) {
  if (messages.empty()) throw Error("complete: empty message list");
  LlmExchange ex;
  ex.request.assign(messages.begin(), messages.end());
  const std::string key = cache_key(messages);
  if (cache_ && !cfg_.bypass_cache) {
    if (auto hit = cache_->get(key)) {
      ex.response = *hit;
      ex.cached = true;
      return ex;
    }
  }

  const auto body = chat_request_body(cfg_, messages);
  const auto started = std::chrono::steady_clock::now();
  JsonPostResult result;
  {
    slots_->acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{*slots_};
    try {
      result = post_json_with_retry(cfg_.base_url, "/chat/completions", body, cfg_.api_key_env,
                                    cfg_.timeout, cfg_.retry,
                                    mix_seed(fnv1a64(key), request_counter_++));
    } catch (const LlmError& e) {
      if (audit_) {
        nlohmann::ordered_json rec;
        rec["key"] = key;
        rec["request"] = body;
        rec["error"] = e.what();
        rec["status"] = e.status();
        rec["attempts"] = e.attempts();
        audit_->append(rec);
      }
      throw;
    }
  }
  ex.latency_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - started)
                      .count();
  ex.attempts = result.attempts;

  const auto& j = result.body;
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
      !j["choices"][0].contains("message") || !j["choices"][0]["message"].contains("content") ||
      !j["choices"][0]["message"]["content"].is_string()) {
    throw LlmError("response lacks choices[0].message.content", 200, ex.attempts);
  }
  ex.response = j["choices"][0]["message"]["content"].get<std::string>();

  if (audit_) {
    nlohmann::ordered_json rec;
    rec["key"] = key;
    rec["request"] = body;
    rec["response"] = ex.response;
    rec["latency_ms"] = ex.latency_ms;
    rec["attempts"] = ex.attempts;
    audit_->append(rec);
  }
  if (cache_) cache_->put(key, ex.response);
  return ex;
}

}  // namespace recharness::llm
