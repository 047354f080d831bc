#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "alignsim/backends.hpp"
#include "alignsim/error.hpp"
#include "httplib.h"

namespace alignsim {

namespace {

// Splits `scheme://host[:port]/path` into the client base and the request path.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must start with http:// or https://");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class Permit {
 public:
  explicit Permit(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~Permit() { s_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  if (config_.endpoint.empty()) throw ValidationError("remote backend needs an endpoint");
  if (config_.max_attempts < 1) throw ValidationError("remote backend needs max_attempts >= 1");
  std::tie(base_, path_) = split_endpoint(config_.endpoint);
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv("ALIGNSIM_API_KEY")) config_.api_key = key;
  }
  if (!config_.exchange_log.empty()) log_ = std::make_unique<ExchangeLog>(config_.exchange_log);
}

RemoteBackend::~RemoteBackend() = default;

json RemoteBackend::request_body(const BackendCall& call) const {
  json messages = json::array();
  for (const auto& m : call.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", config_.model}, {"messages", std::move(messages)}, {"temperature", config_.temperature}};
}

std::string RemoteBackend::complete(const BackendCall& call) {
  const json body = request_body(call);
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    {
      Permit permit(in_flight_);
      httplib::Client client(base_);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      client.set_write_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
      } else if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
      } else {
        try {
          auto j = json::parse(res->body);
          std::string content = j.at("choices").at(0).at("message").at("content").get<std::string>();
          if (log_) log_->append(call, body, content);
          return content;
        } catch (const json::exception& e) {
          last_error = std::string("malformed response: ") + e.what();
        }
      }
    }
    if (attempt < config_.max_attempts) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
  }
  throw TransportError("remote backend " + config_.endpoint + ": " + last_error, config_.max_attempts);
}

}  // namespace alignsim
