#include "mosaic/backend.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mosaic/rng.hpp"

namespace mosaic {

using nlohmann::json;

std::string request_fingerprint(const ChatRequest& request) {
  std::string material;
  for (const auto& m : request.messages) {
    material += m.role;
    material += '\x1f';
    material += m.content;
    material += '\x1e';
  }
  return hash_hex(fnv1a64(material));
}

void MockBackend::script(const std::string& fingerprint,
                         const std::string& response) {
  scripted_[fingerprint] = response;
}

void MockBackend::script_request(const ChatRequest& request,
                                 const std::string& response) {
  scripted_[request_fingerprint(request)] = response;
}

void MockBackend::script_sequence(std::vector<std::string> responses) {
  sequence_ = std::move(responses);
  sequence_pos_ = 0;
}

void MockBackend::set_default_response(std::string response) {
  default_response_ = std::move(response);
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (failures_remaining_ > 0) {
    --failures_remaining_;
    throw BackendError("scripted transport failure", /*transient=*/true);
  }
  if (!sequence_.empty()) {
    const std::string& text =
        sequence_[std::min(sequence_pos_, sequence_.size() - 1)];
    ++sequence_pos_;
    return {text, "stop", 0, 0};
  }
  auto it = scripted_.find(request_fingerprint(request));
  if (it != scripted_.end()) return {it->second, "stop", 0, 0};
  if (policy_ == UnmatchedPolicy::Default && default_response_)
    return {*default_response_, "stop", 0, 0};
  if (policy_ == UnmatchedPolicy::Default)
    return EchoBackend{}.complete(request);
  throw BackendError("no scripted response for fingerprint " +
                     request_fingerprint(request));
}

std::shared_ptr<MockBackend> MockBackend::from_script_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open mock script: " + path);
  auto backend = std::make_shared<MockBackend>();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("default")) {
      backend->set_default_response(j.at("default"));
    } else {
      backend->script(j.at("fingerprint"), j.at("response"));
    }
  }
  return backend;
}

ChatResponse EchoBackend::complete(const ChatRequest& request) {
  const std::string fp = request_fingerprint(request);
  // Two short paragraphs keyed to the request hash; stable across runs.
  std::string text = "Thank you for your interest in our offering. This "
                     "response addresses request " + fp + " directly and "
                     "keeps the key message first.\n\n"
                     "We believe the details above cover what you need. "
                     "Reach out any time for more information.";
  return {text, "stop", 0, 0};
}

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)) {}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_connection_timeout(config_.timeout_seconds, 0);

  json messages = json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", request.model.empty() ? config_.model : request.model},
               {"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};

  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto result = client.Post(config_.path, headers, body.dump(),
                            "application/json");
  if (!result)
    throw BackendError("transport failure: " + to_string(result.error()),
                       /*transient=*/true);
  if (result->status >= 500 || result->status == 429)
    throw BackendError("server error " + std::to_string(result->status),
                       /*transient=*/true);
  if (result->status != 200)
    throw BackendError("request failed with status " +
                       std::to_string(result->status) + ": " + result->body);

  json reply = json::parse(result->body);
  const auto& choice = reply.at("choices").at(0);
  ChatResponse response;
  response.text = choice.at("message").at("content");
  response.finish_reason = choice.value("finish_reason", "");
  if (reply.contains("usage")) {
    response.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    response.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  return response;
}

ChatResponse complete_with_retries(ChatBackend& backend,
                                   const ChatRequest& request, int attempts,
                                   int initial_backoff_ms,
                                   int* attempt_count) {
  int backoff = initial_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      ChatResponse response = backend.complete(request);
      if (attempt_count) *attempt_count = attempt;
      return response;
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= attempts) {
        if (attempt_count) *attempt_count = attempt;
        throw;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

}  // namespace mosaic
