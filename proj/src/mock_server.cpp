#include "hgnas/mock_server.hpp"

#include <httplib.h>

#include <cstdio>
#include <stdexcept>

namespace hgnas {

using nlohmann::json;

MockResponse MockResponse::chat(const std::string& content) {
  const json body = {{"id", "mock"},
                     {"object", "chat.completion"},
                     {"choices", json::array({{{"index", 0},
                                               {"message", {{"role", "assistant"}, {"content", content}}},
                                               {"finish_reason", "stop"}}})}};
  return {200, body.dump(), {}};
}

MockResponse MockResponse::rate_limited(double retry_after_seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", retry_after_seconds);
  return {429, R"({"error": {"message": "rate limit", "type": "rate_limit_exceeded"}})", {{"Retry-After", buf}}};
}

MockResponse MockResponse::context_overflow() {
  return {400,
          R"({"error": {"message": "This model's maximum context length is exceeded.", "type": "invalid_request_error", "code": "context_length_exceeded"}})",
          {}};
}

MockResponse MockResponse::server_error() { return {503, R"({"error": {"message": "unavailable"}})", {}}; }

MockServer::MockServer(std::vector<MockResponse> script)
    : script_(std::move(script)), server_(std::make_unique<httplib::Server>()) {
  server_->Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
    MockResponse r;
    {
      std::lock_guard lock(mu_);
      try {
        requests_.push_back(json::parse(req.body));
      } catch (const json::exception&) {
        requests_.push_back(req.body);
      }
      auth_.push_back(req.get_header_value("Authorization"));
      if (next_ < script_.size()) {
        r = script_[next_++];
      } else {
        r = {500, mock_exhausted_body, {}};
      }
    }
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.status == 500 && r.body == mock_exhausted_body ? "text/plain" : "application/json");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("mock server could not bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<json> MockServer::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<std::string> MockServer::authorizations() const {
  std::lock_guard lock(mu_);
  return auth_;
}

}  // namespace hgnas
