#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "ampere/core/error.hpp"

namespace ampere::textproc {

struct LlmExchange {
  std::string prompt;
  std::string completion;
  std::int64_t latency_ms = 0;
  int attempt = 1;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws LlmTransportError once retries are exhausted.
  virtual LlmExchange complete(const std::string& prompt,
                               const std::string& correlation_id) = 0;
};

class LlmTransportError : public DataError {
 public:
  LlmTransportError(const std::string& what, int attempts)
      : DataError(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

struct LlmEndpoint {
  std::string url;  // http://host[:port]/path
  std::string token;
  std::string model;
  int max_tokens = 256;

  // AMPERE_LLM_ENDPOINT (required), AMPERE_LLM_TOKEN, AMPERE_LLM_MODEL.
  static std::optional<LlmEndpoint> from_env();
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{200};  // doubled after each failure
};

// POSTs {prompt, max_tokens, model} as JSON and reads {completion}. The
// correlation id travels in the X-Correlation-Id header and must be echoed
// back when the server includes one.
class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(LlmEndpoint endpoint, RetryPolicy retry = {});
  LlmExchange complete(const std::string& prompt,
                       const std::string& correlation_id) override;

 private:
  LlmEndpoint endpoint_;
  RetryPolicy retry_;
  std::string host_;
  std::string path_;
};

}  // namespace ampere::textproc
