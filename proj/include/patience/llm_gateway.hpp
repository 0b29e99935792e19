#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "patience/errors.hpp"
#include "patience/gen_params.hpp"

namespace patience::gateway {

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct CompletionResult {
  std::string text;
  double latency_s = 0.0;  // wall clock of the successful attempt only
  int attempts = 1;        // all tries, including failed ones
  std::optional<TokenUsage> usage;
};

struct RetryPolicy {
  int max_retries = 5;
  int base_delay_ms = 1000;
  double backoff_factor = 2.0;
  double jitter = 0.2;  // multiplicative, +-20%
};

struct GatewayConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  RetryPolicy retry;
  int max_in_flight = 4;  // global cap across all calling threads
  int connect_timeout_s = 10;
  int read_timeout_s = 120;
  std::uint64_t jitter_seed = 0;  // 0 = nondeterministic

  // Reads LLM_BASE_URL and LLM_API_KEY.
  static GatewayConfig from_env();
};

enum class ErrorKind {
  Unreachable,  // transport failures / 429 / 5xx after retries exhausted
  BadResponse,  // schema violation or non-retryable HTTP status
  Auth,         // 401 / 403, never retried
};

class GatewayError : public Error {
 public:
  GatewayError(ErrorKind kind, int attempts, const std::string& detail);
  ErrorKind kind() const { return kind_; }
  int attempts() const { return attempts_; }

 private:
  ErrorKind kind_;
  int attempts_;
};

// Transport-level failure inside a provider (connect refused, timeout). Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

struct ProviderResponse {
  int status = 0;
  std::string body;
};

// One attempt against a chat-completion backend. Implementations must be
// callable from multiple threads.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ProviderResponse complete_once(const nlohmann::json& request) = 0;
};

std::shared_ptr<ChatProvider> make_http_provider(const GatewayConfig& cfg);

struct CompletionOutcome {
  std::optional<CompletionResult> result;
  std::optional<GatewayError> error;

  bool ok() const { return result.has_value(); }
};

// Executes chat completions with retries, exponential backoff, and a global
// in-flight cap. Shareable across threads.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatProvider> provider, GatewayConfig cfg);

  /// Sends the prompt as a single user message. Retries 429/5xx/transport
  /// failures with backoff; 401/403 and other 4xx are attempted exactly once.
  CompletionResult complete(const std::string& prompt, const GenParams& params);

  /// Results are positionally aligned with prompts; at most max_in_flight
  /// requests are outstanding at any instant; per-item errors are carried
  /// in-slot, never thrown batch-wide.
  std::vector<CompletionOutcome> complete_batch(const std::vector<std::string>& prompts,
                                                const GenParams& params, int max_in_flight);

  const GatewayConfig& config() const { return cfg_; }

  // Wire format: {"model", "messages": [{"role": "user", "content"}],
  // "temperature", "max_tokens"} plus "seed" when set.
  static nlohmann::json build_request(const std::string& prompt, const GenParams& params);

 private:
  double jitter_factor();

  std::shared_ptr<ChatProvider> provider_;
  GatewayConfig cfg_;
  std::counting_semaphore<> slots_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

}  // namespace patience::gateway
