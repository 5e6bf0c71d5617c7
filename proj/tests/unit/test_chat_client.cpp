#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "recharness/chat_client.hpp"
#include "recharness/embedding.hpp"

using namespace recharness;
using namespace recharness::llm;

namespace {

/// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& text) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}});
  return j.dump();
}

EndpointConfig fast_config(const std::string& url) {
  EndpointConfig c;
  c.base_url = url;
  c.model = "test-model";
  c.api_key_env = "RECHARNESS_TEST_KEY";
  c.retry.backoff_base = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(2000);
  return c;
}

std::vector<Message> one(const std::string& text) { return {{Role::User, text}}; }

}  // namespace

TEST(ChatClient, SendsStandardRequestAndReadsFirstChoice) {
  LocalServer srv;
  nlohmann::json seen;
  std::string auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion(seen["messages"][0]["content"].get<std::string>()),
                    "application/json");
  });
  setenv("RECHARNESS_TEST_KEY", "sk-test", 1);
  ChatClient client(fast_config(srv.url()));
  const auto ex = client.exchange(one("echo me"));
  EXPECT_EQ(ex.response, "echo me");
  EXPECT_EQ(ex.attempts, 1);
  EXPECT_EQ(seen["model"], "test-model");
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_TRUE(seen.contains("max_tokens"));
  EXPECT_EQ(auth, "Bearer sk-test");
  unsetenv("RECHARNESS_TEST_KEY");
}

TEST(ChatClient, RetriesRateLimitThenSucceeds) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 429;
      res.set_content("{}", "application/json");
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  ChatClient client(fast_config(srv.url()));
  const auto ex = client.exchange(one("x"));
  EXPECT_EQ(ex.response, "ok");
  EXPECT_EQ(ex.attempts, 3);
}

TEST(ChatClient, ClientErrorFailsImmediately) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  ChatClient client(fast_config(srv.url()));
  try {
    client.complete(one("x"));
    FAIL() << "expected LlmError";
  } catch (const LlmError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(ChatClient, ServerErrorsExhaustRetries) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  auto cfg = fast_config(srv.url());
  cfg.retry.max_retries = 2;
  ChatClient client(cfg);
  try {
    client.complete(one("x"));
    FAIL() << "expected LlmError";
  } catch (const LlmError& e) {
    EXPECT_EQ(e.status(), 503);
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(ChatClient, TimeoutBelowServerLatency) {
  LocalServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(completion("late"), "application/json");
  });
  auto cfg = fast_config(srv.url());
  cfg.timeout = std::chrono::milliseconds(100);
  cfg.retry.max_retries = 1;
  ChatClient client(cfg);
  try {
    client.complete(one("x"));
    FAIL() << "expected LlmError";
  } catch (const LlmError& e) {
    EXPECT_EQ(e.status(), 0);
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(ChatClient, CacheAndAuditLog) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(completion("cached answer"), "application/json");
  });
  const auto dir = std::filesystem::temp_directory_path() / "recharness_chat_cache_test";
  std::filesystem::remove_all(dir);
  auto cfg = fast_config(srv.url());
  cfg.cache_dir = (dir / "cache").string();
  cfg.audit_log = (dir / "audit.jsonl").string();
  std::filesystem::create_directories(dir);
  {
    ChatClient client(cfg);
    EXPECT_EQ(client.complete(one("q")), "cached answer");
    EXPECT_EQ(client.complete(one("q")), "cached answer");
  }
  EXPECT_EQ(hits.load(), 1);
  cfg.bypass_cache = true;
  {
    ChatClient client(cfg);
    client.complete(one("q"));
  }
  EXPECT_EQ(hits.load(), 2);
  const auto log = read_file(cfg.audit_log->c_str());
  EXPECT_GE(split_lines(log).size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(ChatClient, RemoteEmbedderNormalizes) {
  LocalServer srv;
  srv.server().Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[{"embedding":[3.0,4.0]}]})", "application/json");
  });
  RemoteEmbedderConfig cfg;
  cfg.base_url = srv.url();
  cfg.model = "emb";
  cfg.dim = 2;
  cfg.retry.backoff_base = std::chrono::milliseconds(1);
  RemoteEmbedder e(cfg);
  const auto v = e.embed("anything");
  EXPECT_NEAR(v.values[0], 0.6, 1e-12);
  EXPECT_NEAR(v.values[1], 0.8, 1e-12);
  cfg.dim = 3;
  RemoteEmbedder wrong(cfg);
  EXPECT_THROW(wrong.embed("anything"), Error);
}
