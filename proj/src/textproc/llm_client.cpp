#include "ampere/textproc/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace ampere::textproc {

std::optional<LlmEndpoint> LlmEndpoint::from_env() {
  const char* url = std::getenv("AMPERE_LLM_ENDPOINT");
  if (!url || !*url) return std::nullopt;
  LlmEndpoint e;
  e.url = url;
  if (const char* t = std::getenv("AMPERE_LLM_TOKEN")) e.token = t;
  if (const char* m = std::getenv("AMPERE_LLM_MODEL")) e.model = m;
  return e;
}

HttpLlmClient::HttpLlmClient(LlmEndpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(retry) {
  if (retry_.max_attempts < 1) throw UsageError("retry policy needs at least one attempt");
  const std::string& url = endpoint_.url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw UsageError("LLM endpoint must be an http:// URL: '" + url + "'");
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
}

LlmExchange HttpLlmClient::complete(const std::string& prompt,
                                    const std::string& correlation_id) {
  nlohmann::json body = {{"prompt", prompt}, {"max_tokens", endpoint_.max_tokens}};
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
  const std::string payload = body.dump();

  httplib::Headers headers{{"X-Correlation-Id", correlation_id}};
  if (!endpoint_.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.token);

  std::string last_error;
  auto delay = retry_.base_delay;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    httplib::Client client(host_);
    client.set_connection_timeout(5);
    client.set_read_timeout(60);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, payload, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    if (!res) {
      last_error = "LLM request failed: " + httplib::to_string(res.error());
    } else if (res->status != 200) {
      last_error = "LLM endpoint returned HTTP " + std::to_string(res->status);
    } else if (res->has_header("X-Correlation-Id") &&
               res->get_header_value("X-Correlation-Id") != correlation_id) {
      last_error = "LLM response correlation id mismatch";
    } else {
      auto reply = nlohmann::json::parse(res->body, nullptr, false);
      if (reply.is_object() && reply.contains("completion") && reply["completion"].is_string()) {
        LlmExchange ex;
        ex.prompt = prompt;
        ex.completion = reply["completion"].get<std::string>();
        ex.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        ex.attempt = attempt;
        return ex;
      }
      last_error = "LLM response lacks a string 'completion' field";
    }
    if (attempt < retry_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw LlmTransportError(last_error, retry_.max_attempts);
}

}  // namespace ampere::textproc
