#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mosaic {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what, bool transient = false)
      : std::runtime_error(what), transient_(transient) {}
  bool transient() const { return transient_; }

 private:
  bool transient_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Stable fingerprint of a request's message contents; the mock backend's
// script keys on it.
std::string request_fingerprint(const ChatRequest& request);

// Deterministic scripted backend for tests and desk-scale pipelines.
class MockBackend : public ChatBackend {
 public:
  enum class UnmatchedPolicy { Error, Default };

  MockBackend() = default;

  // fingerprint -> canned response text
  void script(const std::string& fingerprint, const std::string& response);
  // convenience: script by request
  void script_request(const ChatRequest& request, const std::string& response);
  // responses played in order for any request (takes precedence when set)
  void script_sequence(std::vector<std::string> responses);

  void set_default_response(std::string response);
  void set_unmatched_policy(UnmatchedPolicy policy) { policy_ = policy; }
  // Fail the next n calls with a transient error.
  void fail_next(int n) { failures_remaining_ = n; }

  ChatResponse complete(const ChatRequest& request) override;

  // Load a script file: JSON lines {"fingerprint": ..., "response": ...}.
  static std::shared_ptr<MockBackend> from_script_file(const std::string& path);

 private:
  std::map<std::string, std::string> scripted_;
  std::vector<std::string> sequence_;
  std::size_t sequence_pos_ = 0;
  std::optional<std::string> default_response_;
  UnmatchedPolicy policy_ = UnmatchedPolicy::Default;
  int failures_remaining_ = 0;
  std::mutex mutex_;
};

// Echo-style generator: derives a deterministic plausible response from the
// request content. Lets the full pipeline run without any model.
class EchoBackend : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& request) override;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8000
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // sent as Bearer token when non-empty
  int timeout_seconds = 120;
};

// OpenAI-style chat-completion client (message array in, choice text out).
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  HttpBackendConfig config_;
};

// Retry wrapper: up to `attempts` tries on transient errors with exponential
// backoff starting at `initial_backoff_ms`.
ChatResponse complete_with_retries(ChatBackend& backend,
                                   const ChatRequest& request,
                                   int attempts = 3,
                                   int initial_backoff_ms = 100,
                                   int* attempt_count = nullptr);

}  // namespace mosaic
