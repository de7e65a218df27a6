#include "exprag/endpoint.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "exprag/error.hpp"

namespace exprag {

namespace {

std::string env_or_empty(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

bool retriable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

EndpointConfig EndpointConfig::from_env(const std::string& prefix) {
  EndpointConfig cfg;
  cfg.base_url = env_or_empty(prefix + "_URL");
  cfg.model = env_or_empty(prefix + "_MODEL");
  cfg.token = env_or_empty(prefix + "_TOKEN");
  if (cfg.base_url.empty()) throw ConfigError(prefix + "_URL is not set");
  if (cfg.model.empty()) throw ConfigError(prefix + "_MODEL is not set");
  return cfg;
}

JsonEndpointClient::JsonEndpointClient(EndpointConfig config)
    : config_(std::move(config)),
      in_flight_(std::make_shared<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(config_.max_in_flight == 0 ? 1 : config_.max_in_flight))) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL needs a scheme: " + config_.base_url);
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (config_.max_attempts < 1) config_.max_attempts = 1;
}

nlohmann::json JsonEndpointClient::post(const std::string& path, const nlohmann::json& body) const {
  const std::string payload = body.dump();
  auto delay = config_.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      in_flight_->acquire();
      struct Release {
        std::counting_semaphore<>* sem;
        ~Release() { sem->release(); }
      } release{in_flight_.get()};
      return post_once(path, payload);
    } catch (const TransportError&) {
      if (attempt >= config_.max_attempts) throw;
    } catch (const HttpStatusError& e) {
      if (!retriable_status(e.status()) || attempt >= config_.max_attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

nlohmann::json JsonEndpointClient::post_once(const std::string& path, const std::string& body) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

  auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + scheme_host_port_ + path_prefix_ + path +
                         " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) throw HttpStatusError(res->status, res->body);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("<response>", e.what());
  }
}

}  // namespace exprag
