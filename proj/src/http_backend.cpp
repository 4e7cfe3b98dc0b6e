#include "tracecurate/http_backend.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

namespace tracecurate {

Endpoint Endpoint::parse(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError(fmt::format("endpoint \"{}\" has no scheme", url));
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError(fmt::format("unsupported endpoint scheme \"{}\"", scheme));
  }
  const std::size_t path_begin = url.find('/', scheme_end + 3);
  Endpoint e;
  if (path_begin == std::string::npos) {
    e.scheme_host_port = url;
    e.path = "/";
  } else {
    e.scheme_host_port = url.substr(0, path_begin);
    e.path = url.substr(path_begin);
  }
  if (e.scheme_host_port.size() <= scheme_end + 3) {
    throw ConfigError(fmt::format("endpoint \"{}\" has no host", url));
  }
  return e;
}

Json chat_request_body(const HttpBackendConfig& config, std::string_view prompt) {
  Json body = Json::object();
  body["model"] = config.model;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  return body;
}

std::string chat_reply_content(std::string_view response_body) {
  Json j;
  try {
    j = Json::parse(response_body);
  } catch (const Json::parse_error& e) {
    throw BackendError(fmt::format("response is not JSON: {}", e.what()), true);
  }
  try {
    const Json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
  } catch (const Json::exception&) {
  }
  throw BackendError("response has no choices[0].message.content", false);
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)),
      endpoint_(Endpoint::parse(config_.endpoint)),
      slots_(std::make_unique<std::counting_semaphore<>>(
          std::max(1, config_.concurrency))) {
  if (config_.model.empty()) throw ConfigError("judge model name is empty");
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::complete(const JudgeRequest& request) {
  return chat(request.prompt);
}

std::string HttpChatBackend::chat(std::string_view prompt) {
  slots_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*slots_};

  httplib::Client client(endpoint_.scheme_host_port);
  const auto timeout = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str());
        key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const std::string body = chat_request_body(config_, prompt).dump();
  auto res = client.Post(endpoint_.path, headers, body, "application/json");
  if (!res) {
    throw BackendError(fmt::format("request to {} failed: {}", config_.endpoint,
                                   httplib::to_string(res.error())),
                       true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError(fmt::format("server returned HTTP {}", res->status), true);
  }
  if (res->status != 200) {
    throw BackendError(fmt::format("server returned HTTP {}: {}", res->status,
                                   res->body.substr(0, 200)),
                       false);
  }
  return chat_reply_content(res->body);
}

}  // namespace tracecurate
