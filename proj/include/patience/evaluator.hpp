#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patience/corpus.hpp"
#include "patience/errors.hpp"
#include "patience/gen_params.hpp"
#include "patience/grader.hpp"
#include "patience/llm_gateway.hpp"

namespace patience::eval {

class EmptySamplesError : public Error {
 public:
  EmptySamplesError() : Error("latency_stats needs at least one sample") {}
};

class CorpusMismatchError : public Error {
 public:
  using Error::Error;
};

struct LatencyStats {
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;

  bool operator==(const LatencyStats&) const = default;
};

struct PerProblemResult {
  std::string id;
  Verdict verdict = Verdict::Unextractable;
  double latency_s = 0.0;
  std::optional<std::string> extracted_answer;  // canonical form
  std::optional<std::string> error;             // gateway failure annotation

  bool operator==(const PerProblemResult&) const = default;
};

struct EvalReport {
  std::string corpus_name;
  std::int64_t n = 0;
  std::int64_t n_correct = 0;
  double accuracy = 0.0;  // n_correct / n, 0 when n == 0
  LatencyStats latency;   // over exactly the n recorded latencies
  std::vector<PerProblemResult> per_problem;

  bool operator==(const EvalReport&) const = default;
};

// Nearest-rank percentiles: the p-th percentile of n sorted samples is the
// ceil(p*n)-th smallest (1-based). Throws EmptySamplesError on no input.
LatencyStats latency_stats(std::vector<double> samples);

// Runs every problem through the 0-shot evaluation prompt, grades replies
// with the given (tolerant by default) equivalence config, and aggregates.
// A problem whose request fails after retries scores Unextractable with the
// failure recorded in its row; the batch itself never aborts.
EvalReport evaluate(const std::vector<ProblemRecord>& problems, gateway::Gateway& gw,
                    const GenParams& params,
                    const grader::EquivalenceConfig& eq = grader::EquivalenceConfig::tolerant(),
                    const std::string& corpus_name = "");

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

struct Comparison {
  std::string corpus_name;
  double baseline_accuracy = 0.0;   // fraction
  double candidate_accuracy = 0.0;  // fraction
  double accuracy_delta_points = 0.0;
  double baseline_time_s = 0.0;  // mean per-problem seconds
  double candidate_time_s = 0.0;
  double time_delta_s = 0.0;
};

// Deltas between two runs over the same corpus (same name and n);
// throws CorpusMismatchError otherwise.
Comparison compare_reports(const EvalReport& baseline, const EvalReport& candidate);

// Plain-text table, columns method | accuracy (%) | time (s), one decimal
// place, rows baseline / candidate / delta with signed deltas.
std::string render_comparison(const Comparison& c);

nlohmann::json comparison_to_json(const Comparison& c);

}  // namespace patience::eval
