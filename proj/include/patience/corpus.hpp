#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patience/errors.hpp"
#include "patience/gen_params.hpp"

namespace patience {

// One math problem with its gold final answer.
struct ProblemRecord {
  std::string id;
  std::string problem;
  std::string gold_answer;
  // Free-form provenance tag. Unknown keys on an input line (e.g. a reference
  // solution from a third-party dump) are folded in here as a JSON object string.
  std::string source;

  bool operator==(const ProblemRecord&) const = default;
};

enum class SolutionStyle { Concise, Patient };
enum class Verdict { Correct, Incorrect, Unextractable };

std::string to_string(SolutionStyle s);
std::string to_string(Verdict v);
SolutionStyle solution_style_from_string(const std::string& s);
Verdict verdict_from_string(const std::string& s);

// A model-produced solution plus its grading outcome.
// Invariant: verdict == Unextractable iff extracted_answer is absent.
struct CandidateSolution {
  std::string problem_id;
  std::string text;
  SolutionStyle style = SolutionStyle::Concise;
  std::optional<std::string> extracted_answer;  // canonical form
  Verdict verdict = Verdict::Unextractable;
  GenParams gen_params;
  double latency_s = 0.0;

  bool operator==(const CandidateSolution&) const = default;
};

// Training triple: chosen is the patient rewrite, rejected the concise original.
struct PreferencePair {
  std::string problem_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  nlohmann::json meta = nlohmann::json::object();

  bool operator==(const PreferencePair&) const = default;
};

// Counters reported by one pipeline run. The chain
//   n_pairs_emitted <= n_correct_refined <= n_refined <= n_correct_concise
//                   <= n_generated       <= n_problems (retries add to n_generated)
// holds after every run.
struct PipelineStats {
  std::int64_t n_problems = 0;
  std::int64_t n_generated = 0;
  std::int64_t n_correct_concise = 0;
  std::int64_t n_refined = 0;
  std::int64_t n_correct_refined = 0;
  std::int64_t n_pairs_emitted = 0;
  std::map<std::string, std::int64_t> drop_reasons;

  bool operator==(const PipelineStats&) const = default;
};

class MissingFileError : public Error {
 public:
  explicit MissingFileError(std::filesystem::path path)
      : Error("file not found: " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class MalformedLineError : public Error {
 public:
  MalformedLineError(const std::filesystem::path& path, int line_no, const std::string& detail)
      : Error(path.string() + ":" + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}
  int line_no() const { return line_no_; }  // 1-based

 private:
  int line_no_;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(std::string id)
      : Error("duplicate problem id: " + id), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace corpus {

std::vector<ProblemRecord> load_problems(const std::filesystem::path& path);
std::vector<CandidateSolution> load_solutions(const std::filesystem::path& path);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

// One JSON object per line; returns the number of lines written.
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<ProblemRecord>& records);
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<CandidateSolution>& records);
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<PreferencePair>& records);

void write_stats(const std::filesystem::path& path, const PipelineStats& stats);
PipelineStats load_stats(const std::filesystem::path& path);

// Per-record serialization, shared by the writers above and by the
// pipeline's checkpoint appender.
nlohmann::json to_json(const ProblemRecord& r);
nlohmann::json to_json(const CandidateSolution& s);
nlohmann::json to_json(const PreferencePair& p);

}  // namespace corpus
}  // namespace patience
