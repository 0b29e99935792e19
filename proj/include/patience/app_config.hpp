#pragma once

#include <filesystem>
#include <string>

#include "patience/dpo.hpp"
#include "patience/errors.hpp"
#include "patience/gen_params.hpp"
#include "patience/grader.hpp"
#include "patience/llm_gateway.hpp"

namespace patience::cli {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// On-disk JSON config. Every section and key is optional; unknown keys are
// rejected by name so typos do not silently fall back to defaults. The API
// key is intentionally absent: it only ever comes from LLM_API_KEY.
//
// {
//   "gateway":    {"base_url", "max_in_flight", "connect_timeout_s",
//                  "read_timeout_s", "retry": {"max_retries", "base_delay_ms",
//                  "backoff_factor", "jitter"}},
//   "generation": {"model", "temperature", "max_tokens", "seed"},
//   "refinement": {"model", "temperature", "max_tokens", "seed"},
//   "evaluation": {"model", "temperature", "max_tokens", "seed",
//                  "rel_tol", "abs_tol"},
//   "pipeline":   {"regrade_refined", "max_gen_attempts_per_problem"},
//   "dpo":        {"beta", "lr", "steps", "seed"}
// }
struct AppConfig {
  gateway::GatewayConfig gateway;
  GenParams generation{.model = "generator", .temperature = 0.7, .max_tokens = 1024};
  GenParams refinement{.model = "refiner", .temperature = 0.7, .max_tokens = 2048};
  GenParams evaluation{.model = "candidate", .temperature = 0.0, .max_tokens = 1024};
  grader::EquivalenceConfig eval_equivalence = grader::EquivalenceConfig::tolerant();
  bool regrade_refined = true;
  int max_gen_attempts_per_problem = 1;
  dpo::DpoConfig dpo;
};

// Defaults plus LLM_BASE_URL / LLM_API_KEY from the environment.
AppConfig default_config();

// default_config() overridden by the file's contents. Throws ConfigError on
// unreadable files, invalid JSON, unknown keys (named with their dotted
// path) or wrongly typed values.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace patience::cli
