#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "patience/corpus.hpp"
#include "patience/errors.hpp"

namespace patience::grader {

enum class ExtractionRule { Boxed, AnswerIsPhrase, HashMarks };

std::string to_string(ExtractionRule rule);

// Final answer pulled out of a solution text.
struct ExtractedAnswer {
  std::string raw;        // trimmed matched substring
  std::string canonical;  // normalize_answer(raw), always non-empty
  ExtractionRule rule = ExtractionRule::Boxed;

  bool operator==(const ExtractedAnswer&) const = default;
};

// Numeric comparison tolerances. Default-constructed is exact (the pair filter
// setting); tolerant() is what the evaluation harness uses so float-rendered
// model output still scores.
struct EquivalenceConfig {
  double rel_tol = 0.0;
  double abs_tol = 0.0;

  static EquivalenceConfig exact() { return {0.0, 0.0}; }
  static EquivalenceConfig tolerant() { return {1e-6, 1e-9}; }
};

class EmptyGoldError : public Error {
 public:
  using Error::Error;
};

/// Contents of the last balanced `\boxed{...}` occurrence. Nested braces
/// belong to the content; occurrences without a closing brace are skipped.
std::optional<std::string> extract_boxed(std::string_view text);

/// Applies extraction rules in priority order: Boxed, then the last
/// "The answer is:" line remainder, then the last `####` line remainder.
/// A rule whose match normalizes to an empty string does not fire.
std::optional<ExtractedAnswer> extract_final_answer(std::string_view text);

/// Deterministic canonicalization: trims, unwraps $...$ / \(...\) / {...},
/// strips currency prefixes, percent and unit suffixes, thousands separators
/// and trailing periods, lower-cases alphabetic residue, reduces integer
/// fractions (\frac{a}{b} or a/b) to lowest terms, and renders decimals
/// without trailing zeros. Unrecognized forms pass through trimmed.
/// Idempotent: normalize(normalize(x)) == normalize(x).
std::string normalize_answer(std::string_view raw);

/// True when the canonical strings are identical, or both parse as
/// rationals/decimals with |x - y| <= max(abs_tol, rel_tol * max(|x|, |y|)).
/// Exact rational comparison is used when both sides are fractions.
bool answers_equivalent(const std::string& a, const std::string& b, const EquivalenceConfig& cfg);

/// Unextractable when no rule fires; otherwise Correct iff the extracted
/// answer is equivalent to the normalized gold answer.
Verdict grade_solution(std::string_view solution_text, const std::string& gold_answer,
                       const EquivalenceConfig& cfg);

// Version tag recorded into PreferencePair meta.
std::string_view version();

}  // namespace patience::grader
