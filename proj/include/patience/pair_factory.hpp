#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patience/corpus.hpp"
#include "patience/errors.hpp"
#include "patience/gen_params.hpp"
#include "patience/grader.hpp"
#include "patience/llm_gateway.hpp"

namespace patience::pipeline {

class PreconditionError : public Error {
 public:
  using Error::Error;
};

struct PipelineConfig {
  GenParams gen_params;
  GenParams refine_params;

  // Generation is retried until the graded verdict is Correct or the budget
  // runs out; each attempt counts toward n_generated.
  int max_gen_attempts_per_problem = 1;

  // Re-grade the refined solution and drop the pair unless it is still
  // correct. Disabling keeps any refinement whose source was correct.
  bool regrade_refined = true;

  // Pairs are filtered with exact equivalence by default; numeric slack here
  // would admit near-miss answers into the training set.
  grader::EquivalenceConfig equivalence = grader::EquivalenceConfig::exact();

  // When set, every kept pair is appended here as it is produced, and the id
  // of every attempted problem goes to a processed_ids.txt sidecar in the
  // same directory. With resume on, ids already in the sidecar are skipped
  // and previously checkpointed pairs are folded into the result.
  std::optional<std::filesystem::path> checkpoint_path;
  bool resume = false;
};

struct PipelineResult {
  std::vector<PreferencePair> pairs;  // checkpointed pairs first, then new
  PipelineStats stats;                // covers this run's attempted problems
};

// One generation round: renders the step-by-step prompt, completes, grades
// the reply against the gold answer; retries per the config budget and
// returns the last attempt. attempts_out (optional) receives the number of
// completions actually issued.
CandidateSolution generate_concise(gateway::Gateway& gw, const ProblemRecord& problem,
                                   const PipelineConfig& cfg, int* attempts_out = nullptr);

// One refinement call: asks for a more detailed rewrite of the concise
// solution and grades the rewrite (or copies the Correct verdict through
// when regrading is off). Throws PreconditionError unless concise is Correct.
CandidateSolution refine_to_patient(gateway::Gateway& gw, const ProblemRecord& problem,
                                    const CandidateSolution& concise, const PipelineConfig& cfg);

// Assembles the preference pair: prompt is the generation prompt, chosen the
// patient text, rejected the concise text. Absent when the filter rules
// reject the combination; then *drop_reason names which rule fired
// (concise_incorrect, concise_unextractable, refined_incorrect,
// refined_unextractable, degenerate_pair).
std::optional<PreferencePair> build_pair(const ProblemRecord& problem,
                                         const CandidateSolution& concise,
                                         const CandidateSolution& patient,
                                         const PipelineConfig& cfg,
                                         std::string* drop_reason = nullptr);

// Drives generate -> filter -> refine -> pair for every problem. Problems
// run concurrently up to the gateway's in-flight cap, but results are
// committed strictly in input order, so checkpoint files and stats are
// reproducible for a fixed provider script. Per-problem gateway failures
// are recorded under drop_reasons["gateway_error"]; checkpoint I/O errors
// abort the run.
PipelineResult run_pipeline(gateway::Gateway& gw, const std::vector<ProblemRecord>& problems,
                            const PipelineConfig& cfg);

// Sidecar recording attempted problem ids, one per line, next to the
// checkpoint file.
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace patience::pipeline
