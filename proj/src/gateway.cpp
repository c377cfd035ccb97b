#include "hgnas/gateway.hpp"

#include "hgnas/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace hgnas {

using nlohmann::json;

void GatewayConfig::check() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("gateway temperature must be in [0, 2]");
  if (!(timeout_seconds > 0.0)) throw ConfigError("gateway timeout must be positive");
  if (max_retries < 0) throw ConfigError("gateway max_retries must be non-negative");
  if (backoff_initial_seconds < 0.0 || backoff_max_seconds < 0.0) throw ConfigError("gateway backoff must be non-negative");
  if (api_key_env.empty()) throw ConfigError("gateway api_key_env must name an environment variable");
  split_endpoint(endpoint);
}

json to_json(const GatewayConfig& c) {
  return {{"endpoint", c.endpoint},
          {"model", c.model},
          {"api_key_env", c.api_key_env},
          {"temperature", c.temperature},
          {"max_retries", c.max_retries},
          {"timeout_seconds", c.timeout_seconds},
          {"backoff_initial_seconds", c.backoff_initial_seconds},
          {"backoff_max_seconds", c.backoff_max_seconds},
          {"log_path", c.log_path}};
}

GatewayConfig gateway_config_from_json(const json& j, GatewayConfig c) {
  if (!j.is_object()) throw ConfigError("gateway config must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "endpoint") c.endpoint = value.get<std::string>();
      else if (key == "model") c.model = value.get<std::string>();
      else if (key == "api_key_env") c.api_key_env = value.get<std::string>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "max_retries") c.max_retries = value.get<int>();
      else if (key == "timeout_seconds") c.timeout_seconds = value.get<double>();
      else if (key == "backoff_initial_seconds") c.backoff_initial_seconds = value.get<double>();
      else if (key == "backoff_max_seconds") c.backoff_max_seconds = value.get<double>();
      else if (key == "log_path") c.log_path = value.get<std::string>();
      else throw ConfigError("unknown gateway key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("gateway." + key + ": " + e.what());
    }
  }
  c.check();
  return c;
}

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
  const std::string s = url.substr(0, scheme);
  if (s != "http" && s != "https") throw ConfigError("endpoint scheme must be http or https");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

Gateway::Gateway(GatewayConfig cfg, Sleeper sleeper) : cfg_(std::move(cfg)), sleep_(std::move(sleeper)) {
  cfg_.check();
  if (!sleep_) sleep_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  if (!cfg_.log_path.empty()) log_ = std::make_unique<TranscriptWriter>(cfg_.log_path);
}

void Gateway::log(json record, const CallContext& ctx) {
  if (!log_) return;
  record["stage"] = ctx.stage;
  record["iteration"] = ctx.iteration;
  log_->write(std::move(record));
}

std::string Gateway::complete(const std::string& system, const std::vector<ChatMessage>& messages,
                              const CallContext& ctx) {
  return complete(system, messages, cfg_.temperature, ctx);
}

namespace {

bool is_context_overflow(int status, const std::string& body) {
  if (status != 400 && status != 413) return false;
  return body.find("context_length_exceeded") != std::string::npos ||
         body.find("maximum context length") != std::string::npos;
}

double retry_after_seconds(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return -1.0;
  const std::string v = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || !std::isfinite(d) || d < 0) return -1.0;
  return d;
}

}  // namespace

std::string Gateway::complete(const std::string& system, const std::vector<ChatMessage>& messages, double temperature,
                              const CallContext& ctx) {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must be in [0, 2]");
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");

  json msgs = json::array();
  if (!system.empty()) msgs.push_back({{"role", "system"}, {"content", system}});
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  const json body = {{"model", cfg_.model}, {"messages", msgs}, {"temperature", temperature}};
  const std::string payload = body.dump();

  const auto [origin, path] = split_endpoint(cfg_.endpoint);
  httplib::Client client(origin);
  const auto whole = std::chrono::duration<double>(cfg_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(whole));
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  double backoff = cfg_.backoff_initial_seconds;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    for (const auto& m : msgs)
      log({{"kind", "request"}, {"attempt", attempt}, {"role", m["role"]}, {"content", m["content"]},
           {"model", cfg_.model}, {"temperature", temperature}},
          ctx);
    ++requests_;
    httplib::Result res = client.Post(path, headers, payload, "application/json");
    double wait = backoff;
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      log({{"kind", "error"}, {"attempt", attempt}, {"role", "error"}, {"content", last_error}}, ctx);
    } else {
      const int status = res->status;
      if (status == 200) {
        std::string content;
        try {
          content = json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
          log({{"kind", "response"}, {"attempt", attempt}, {"status", status}, {"role", "error"}, {"content", res->body}},
              ctx);
          throw TransportError(std::string("malformed chat-completion response: ") + e.what());
        }
        log({{"kind", "response"}, {"attempt", attempt}, {"status", status}, {"role", "assistant"}, {"content", content}},
            ctx);
        return content;
      }
      log({{"kind", "response"}, {"attempt", attempt}, {"status", status}, {"role", "error"}, {"content", res->body}},
          ctx);
      if (is_context_overflow(status, res->body))
        throw ContextOverflow("endpoint rejected the request: context length exceeded");
      last_error = "HTTP " + std::to_string(status);
      if (status == 429) {
        const double ra = retry_after_seconds(res);
        if (ra >= 0) wait = ra;
      } else if (status < 500) {
        throw TransportError("chat-completion request failed with " + last_error + ": " + res->body.substr(0, 200));
      }
    }
    if (attempt == cfg_.max_retries) break;
    sleep_(std::chrono::duration<double>(std::min(wait, cfg_.backoff_max_seconds)));
    backoff = std::min(backoff * 2.0, cfg_.backoff_max_seconds);
  }
  throw TransportError("chat-completion request failed after " + std::to_string(cfg_.max_retries + 1) +
                       " attempt(s): " + last_error);
}

}  // namespace hgnas
