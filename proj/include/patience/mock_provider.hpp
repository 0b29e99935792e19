#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "patience/corpus.hpp"
#include "patience/llm_gateway.hpp"

namespace patience::gateway {

// One scripted response, keyed by (template kind, problem id). The first
// fail_times matching requests fail with fail_code, later ones succeed.
struct MockScriptEntry {
  std::string template_name;  // "generate" | "refine" | "eval"
  std::string problem_id;
  std::string respond;
  int fail_times = 0;
  int fail_code = 500;
  int delay_ms = 0;
};

// JSONL: {"match": {"template": str, "problem_id": str}, "respond": str,
//         "fail_times"?: int, "fail_code"?: int, "delay_ms"?: int}
std::vector<MockScriptEntry> load_mock_script(const std::filesystem::path& path);

// Deterministic offline provider. Recovers (template kind, problem id) from
// the incoming prompt by matching the fixed template frames against the known
// problem texts; unmatched prompts get HTTP 404 so mis-scripted tests fail loudly.
class MockProvider final : public ChatProvider {
 public:
  MockProvider(std::vector<ProblemRecord> problems, std::vector<MockScriptEntry> script);

  ProviderResponse complete_once(const nlohmann::json& request) override;

  // Adds a uniform 0..max_ms sleep per request, seeded for reproducible trials.
  void set_random_delay(int max_ms, std::uint64_t seed);

  int concurrency_high_water() const;
  int total_requests() const;

 private:
  struct EntryState {
    MockScriptEntry entry;
    int failures_left = 0;
  };

  EntryState* route(const std::string& prompt, std::string* why);

  std::map<std::string, std::string> problem_id_by_text_;
  std::map<std::pair<std::string, std::string>, std::size_t> entry_index_;
  std::vector<EntryState> entries_;

  mutable std::mutex mu_;
  std::mt19937_64 delay_rng_;
  int random_delay_max_ms_ = 0;
  int in_flight_ = 0;
  int high_water_ = 0;
  int total_requests_ = 0;
};

}  // namespace patience::gateway
