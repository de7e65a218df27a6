#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

namespace exprag {

// Connection settings for an OpenAI-compatible HTTP endpoint.
struct EndpointConfig {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string model;
  std::string token;     // sent as "Authorization: Bearer <token>" when non-empty
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 8;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt

  // Reads <prefix>_URL, <prefix>_MODEL, <prefix>_TOKEN. Throws ConfigError if
  // the URL or model is missing.
  static EndpointConfig from_env(const std::string& prefix);
};

// POSTs JSON bodies with bounded concurrency and retry on transport errors and
// retriable statuses (408, 429, 5xx).
class JsonEndpointClient {
 public:
  explicit JsonEndpointClient(EndpointConfig config);

  // Throws TransportError / HttpStatusError after the retry budget is spent,
  // ParseError when the reply body is not JSON.
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  const EndpointConfig& config() const noexcept { return config_; }

 private:
  nlohmann::json post_once(const std::string& path, const std::string& body) const;

  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::shared_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace exprag
