#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace hgnas {

struct MockResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;

  // 200 with a chat-completion body whose first choice carries `content`.
  static MockResponse chat(const std::string& content);
  static MockResponse rate_limited(double retry_after_seconds);
  static MockResponse context_overflow();
  static MockResponse server_error();
};

inline constexpr const char* mock_exhausted_body = "mock script exhausted";

// Local chat-completion endpoint on 127.0.0.1 with an ephemeral port. Serves the script
// in order, one entry per POST, then answers 500 with mock_exhausted_body.
class MockServer {
 public:
  explicit MockServer(std::vector<MockResponse> script);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const;  // http://127.0.0.1:<port>/v1/chat/completions

  // Request bodies received so far, parsed; a body that is not JSON is kept as a string.
  std::vector<nlohmann::json> requests() const;
  // Authorization headers received so far.
  std::vector<std::string> authorizations() const;

 private:
  std::vector<MockResponse> script_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
  std::vector<nlohmann::json> requests_;
  std::vector<std::string> auth_;
};

}  // namespace hgnas
