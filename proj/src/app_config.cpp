#include "patience/app_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

namespace patience::cli {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown config key: " + prefix + item.key());
  }
}

void read_string(const json& j, const char* key, const std::string& prefix, std::string& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_string()) throw ConfigError("config key " + prefix + key + " must be a string");
  out = it->get<std::string>();
}

void read_double(const json& j, const char* key, const std::string& prefix, double& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number()) throw ConfigError("config key " + prefix + key + " must be a number");
  out = it->get<double>();
}

void read_int(const json& j, const char* key, const std::string& prefix, int& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer())
    throw ConfigError("config key " + prefix + key + " must be an integer");
  out = it->get<int>();
}

void read_bool(const json& j, const char* key, const std::string& prefix, bool& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_boolean()) throw ConfigError("config key " + prefix + key + " must be a boolean");
  out = it->get<bool>();
}

void read_params(const json& j, const std::string& prefix, GenParams& out,
                 std::initializer_list<const char*> extra_allowed = {}) {
  std::vector<const char*> allowed{"model", "temperature", "max_tokens", "seed"};
  allowed.insert(allowed.end(), extra_allowed.begin(), extra_allowed.end());
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown config key: " + prefix + item.key());
  }
  read_string(j, "model", prefix, out.model);
  read_double(j, "temperature", prefix, out.temperature);
  read_int(j, "max_tokens", prefix, out.max_tokens);
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_integer())
      throw ConfigError("config key " + prefix + "seed must be an integer");
    out.seed = it->get<std::int64_t>();
  }
  if (out.temperature < 0) throw ConfigError("config key " + prefix + "temperature must be >= 0");
  if (out.max_tokens < 1) throw ConfigError("config key " + prefix + "max_tokens must be >= 1");
}

}  // namespace

AppConfig default_config() {
  AppConfig cfg;
  cfg.gateway = gateway::GatewayConfig::from_env();
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");

  AppConfig cfg = default_config();
  check_keys(j, "", {"gateway", "generation", "refinement", "evaluation", "pipeline", "dpo"});

  if (const auto it = j.find("gateway"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key gateway must be an object");
    check_keys(*it, "gateway.",
               {"base_url", "max_in_flight", "connect_timeout_s", "read_timeout_s", "retry",
                "jitter_seed"});
    read_string(*it, "base_url", "gateway.", cfg.gateway.base_url);
    read_int(*it, "max_in_flight", "gateway.", cfg.gateway.max_in_flight);
    read_int(*it, "connect_timeout_s", "gateway.", cfg.gateway.connect_timeout_s);
    read_int(*it, "read_timeout_s", "gateway.", cfg.gateway.read_timeout_s);
    if (const auto seed = it->find("jitter_seed"); seed != it->end()) {
      if (!seed->is_number_integer())
        throw ConfigError("config key gateway.jitter_seed must be an integer");
      cfg.gateway.jitter_seed = seed->get<std::uint64_t>();
    }
    if (const auto retry = it->find("retry"); retry != it->end()) {
      if (!retry->is_object()) throw ConfigError("config key gateway.retry must be an object");
      check_keys(*retry, "gateway.retry.",
                 {"max_retries", "base_delay_ms", "backoff_factor", "jitter"});
      read_int(*retry, "max_retries", "gateway.retry.", cfg.gateway.retry.max_retries);
      read_int(*retry, "base_delay_ms", "gateway.retry.", cfg.gateway.retry.base_delay_ms);
      read_double(*retry, "backoff_factor", "gateway.retry.", cfg.gateway.retry.backoff_factor);
      read_double(*retry, "jitter", "gateway.retry.", cfg.gateway.retry.jitter);
    }
    if (cfg.gateway.max_in_flight < 1)
      throw ConfigError("config key gateway.max_in_flight must be >= 1");
  }

  if (const auto it = j.find("generation"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key generation must be an object");
    read_params(*it, "generation.", cfg.generation);
  }
  if (const auto it = j.find("refinement"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key refinement must be an object");
    read_params(*it, "refinement.", cfg.refinement);
  }
  if (const auto it = j.find("evaluation"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key evaluation must be an object");
    read_params(*it, "evaluation.", cfg.evaluation, {"rel_tol", "abs_tol"});
    read_double(*it, "rel_tol", "evaluation.", cfg.eval_equivalence.rel_tol);
    read_double(*it, "abs_tol", "evaluation.", cfg.eval_equivalence.abs_tol);
    if (cfg.eval_equivalence.rel_tol < 0 || cfg.eval_equivalence.abs_tol < 0)
      throw ConfigError("config keys evaluation.rel_tol/abs_tol must be >= 0");
  }
  if (const auto it = j.find("pipeline"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key pipeline must be an object");
    check_keys(*it, "pipeline.", {"regrade_refined", "max_gen_attempts_per_problem"});
    read_bool(*it, "regrade_refined", "pipeline.", cfg.regrade_refined);
    read_int(*it, "max_gen_attempts_per_problem", "pipeline.", cfg.max_gen_attempts_per_problem);
    if (cfg.max_gen_attempts_per_problem < 1)
      throw ConfigError("config key pipeline.max_gen_attempts_per_problem must be >= 1");
  }
  if (const auto it = j.find("dpo"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config key dpo must be an object");
    check_keys(*it, "dpo.", {"beta", "lr", "steps", "seed"});
    read_double(*it, "beta", "dpo.", cfg.dpo.beta);
    read_double(*it, "lr", "dpo.", cfg.dpo.lr);
    read_int(*it, "steps", "dpo.", cfg.dpo.steps);
    if (const auto seed = it->find("seed"); seed != it->end()) {
      if (!seed->is_number_integer()) throw ConfigError("config key dpo.seed must be an integer");
      cfg.dpo.seed = seed->get<std::uint64_t>();
    }
    if (cfg.dpo.beta <= 0) throw ConfigError("config key dpo.beta must be > 0");
    if (cfg.dpo.lr <= 0) throw ConfigError("config key dpo.lr must be > 0");
    if (cfg.dpo.steps < 0) throw ConfigError("config key dpo.steps must be >= 0");
  }
  return cfg;
}

}  // namespace patience::cli
