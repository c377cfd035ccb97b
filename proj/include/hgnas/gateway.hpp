#pragma once

#include "hgnas/jsonl.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

struct GatewayConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 1.0;  // used when a call does not pass its own
  int max_retries = 3;
  double timeout_seconds = 120.0;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 60.0;
  std::string log_path;  // JSON-lines transcript; empty disables logging

  void check() const;
  bool operator==(const GatewayConfig&) const = default;
};

nlohmann::json to_json(const GatewayConfig& c);
GatewayConfig gateway_config_from_json(const nlohmann::json& j, GatewayConfig defaults = {});

struct ChatMessage {
  std::string role;
  std::string content;
};

// Labels copied into every transcript record of one call.
struct CallContext {
  std::string stage;
  int iteration = -1;
};

// Chat-completion client. The key is read from the configured environment variable at
// call time and is only ever placed in the Authorization header, never in a log record.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  explicit Gateway(GatewayConfig cfg, Sleeper sleeper = {});

  // Returns choices[0].message.content. Retries transport failures, 5xx and 429 with
  // exponential backoff (429 honours Retry-After); throws ContextOverflow on a
  // context-length rejection and TransportError once retries are exhausted.
  std::string complete(const std::string& system, const std::vector<ChatMessage>& messages, double temperature,
                       const CallContext& ctx = {});
  std::string complete(const std::string& system, const std::vector<ChatMessage>& messages,
                       const CallContext& ctx = {});

  const GatewayConfig& config() const { return cfg_; }
  int requests_sent() const { return requests_; }

 private:
  void log(nlohmann::json record, const CallContext& ctx);

  GatewayConfig cfg_;
  Sleeper sleep_;
  std::unique_ptr<TranscriptWriter> log_;
  int requests_ = 0;
};

// Splits "scheme://host[:port]/path" into the origin and the path.
std::pair<std::string, std::string> split_endpoint(const std::string& url);

}  // namespace hgnas
