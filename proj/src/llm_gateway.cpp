#include "patience/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <utility>

#ifdef PATIENCE_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace patience::gateway {
namespace {

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Unreachable: return "endpoint unreachable";
    case ErrorKind::BadResponse: return "bad response";
    case ErrorKind::Auth: return "authentication failed";
  }
  return "gateway error";
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

class HttpProvider final : public ChatProvider {
 public:
  explicit HttpProvider(GatewayConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.base_url.find("://");
    const auto path_start =
        cfg_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
      host_ = cfg_.base_url;
    } else {
      host_ = cfg_.base_url.substr(0, path_start);
      path_prefix_ = cfg_.base_url.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }

  ProviderResponse complete_once(const nlohmann::json& request) override {
    // One client per call: httplib clients are not safe for concurrent reuse.
    httplib::Client client(host_);
    client.set_connection_timeout(cfg_.connect_timeout_s, 0);
    client.set_read_timeout(cfg_.read_timeout_s, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    const auto res = client.Post(path_prefix_ + "/chat/completions", headers, request.dump(),
                                 "application/json");
    if (!res) throw TransportError(httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  GatewayConfig cfg_;
  std::string host_;
  std::string path_prefix_;
};

struct SlotGuard {
  std::counting_semaphore<>& sem;
  ~SlotGuard() { sem.release(); }
};

}  // namespace

GatewayError::GatewayError(ErrorKind kind, int attempts, const std::string& detail)
    : Error(std::string(kind_name(kind)) + ": " + detail + " (attempts: " +
            std::to_string(attempts) + ")"),
      kind_(kind),
      attempts_(attempts) {}

GatewayConfig GatewayConfig::from_env() {
  GatewayConfig cfg;
  if (const char* url = std::getenv("LLM_BASE_URL")) cfg.base_url = url;
  if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
  return cfg;
}

std::shared_ptr<ChatProvider> make_http_provider(const GatewayConfig& cfg) {
  return std::make_shared<HttpProvider>(cfg);
}

nlohmann::json Gateway::build_request(const std::string& prompt, const GenParams& params) {
  nlohmann::json req{{"model", params.model},
                     {"messages", nlohmann::json::array({nlohmann::json{
                                      {"role", "user"}, {"content", prompt}}})},
                     {"temperature", params.temperature},
                     {"max_tokens", params.max_tokens}};
  if (params.seed) req["seed"] = *params.seed;
  return req;
}

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, GatewayConfig cfg)
    : provider_(std::move(provider)),
      cfg_(std::move(cfg)),
      slots_(std::max(1, cfg_.max_in_flight)),
      rng_(cfg_.jitter_seed != 0 ? cfg_.jitter_seed : std::random_device{}()) {}

double Gateway::jitter_factor() {
  const double j = std::clamp(cfg_.retry.jitter, 0.0, 1.0);
  if (j == 0.0) return 1.0;
  std::lock_guard lock(rng_mu_);
  return std::uniform_real_distribution<double>(1.0 - j, 1.0 + j)(rng_);
}

CompletionResult Gateway::complete(const std::string& prompt, const GenParams& params) {
  const nlohmann::json request = build_request(prompt, params);
  slots_.acquire();
  SlotGuard guard{slots_};

  const int max_attempts = std::max(0, cfg_.retry.max_retries) + 1;
  std::string last_detail;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<ProviderResponse> response;
    try {
      response = provider_->complete_once(request);
    } catch (const TransportError& e) {
      last_detail = e.what();
    }

    if (response) {
      if (response->status == 200) {
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        nlohmann::json body;
        try {
          body = nlohmann::json::parse(response->body);
        } catch (const nlohmann::json::exception& e) {
          throw GatewayError(ErrorKind::BadResponse,
                             attempt, std::string("response is not JSON: ") + e.what());
        }
        CompletionResult result;
        try {
          result.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
          throw GatewayError(ErrorKind::BadResponse, attempt,
                             "response lacks choices[0].message.content");
        }
        result.latency_s = elapsed;
        result.attempts = attempt;
        if (const auto it = body.find("usage"); it != body.end() && it->is_object()) {
          TokenUsage usage;
          usage.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
          usage.completion_tokens = it->value("completion_tokens", std::int64_t{0});
          result.usage = usage;
        }
        return result;
      }
      if (response->status == 401 || response->status == 403)
        throw GatewayError(ErrorKind::Auth, attempt, "HTTP " + std::to_string(response->status));
      if (!retryable_status(response->status))
        throw GatewayError(ErrorKind::BadResponse, attempt,
                           "unexpected HTTP " + std::to_string(response->status));
      last_detail = "HTTP " + std::to_string(response->status);
    }

    if (attempt < max_attempts) {
      const double delay = static_cast<double>(cfg_.retry.base_delay_ms) *
                           std::pow(cfg_.retry.backoff_factor, attempt - 1) * jitter_factor();
      std::this_thread::sleep_for(
          std::chrono::milliseconds(std::llround(std::max(0.0, delay))));
    } else {
      throw GatewayError(ErrorKind::Unreachable, attempt, last_detail);
    }
  }
  throw GatewayError(ErrorKind::Unreachable, max_attempts, last_detail);  // unreachable
}

std::vector<CompletionOutcome> Gateway::complete_batch(const std::vector<std::string>& prompts,
                                                       const GenParams& params,
                                                       int max_in_flight) {
  if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
  std::vector<CompletionOutcome> out(prompts.size());
  if (prompts.empty()) return out;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      try {
        out[i].result = complete(prompts[i], params);
      } catch (const GatewayError& e) {
        out[i].error = e;
      } catch (const Error& e) {
        out[i].error = GatewayError(ErrorKind::BadResponse, 1, e.what());
      }
    }
  };

  const std::size_t n_workers = std::min(static_cast<std::size_t>(max_in_flight), prompts.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  return out;
}

}  // namespace patience::gateway
