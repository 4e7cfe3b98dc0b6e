#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "tracecurate/judge.hpp"

namespace tracecurate {

struct HttpBackendConfig {
  // Full URL of a chat-completions endpoint, e.g.
  // http://localhost:8000/v1/chat/completions
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  // Name of the environment variable holding the bearer token; an unset
  // variable means no Authorization header.
  std::string api_key_env = "TRACECURATE_API_KEY";
  int concurrency = 4;
  std::chrono::seconds timeout{120};
};

// Parsed endpoint URL.
struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v1/chat/completions"

  static Endpoint parse(const std::string& url);
};

// JSON body sent for a single-turn prompt.
Json chat_request_body(const HttpBackendConfig& config, std::string_view prompt);
// Extracts choices[0].message.content; throws BackendError otherwise.
std::string chat_reply_content(std::string_view response_body);

// Chat-completions client. At most `concurrency` requests are in flight;
// 429, 5xx and connection failures are reported as retryable.
class HttpChatBackend final : public JudgeBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  ~HttpChatBackend() override;

  std::string name() const override { return "http:" + config_.model; }
  bool deterministic() const override { return config_.temperature == 0.0; }
  std::string complete(const JudgeRequest& request) override;

  // Sends `prompt` without going through a JudgeRequest.
  std::string chat(std::string_view prompt);

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  HttpBackendConfig config_;
  Endpoint endpoint_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace tracecurate
