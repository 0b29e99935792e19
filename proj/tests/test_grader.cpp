#include <doctest.h>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "patience/grader.hpp"
#include "grader_cases.hpp"
#include "sample_texts.hpp"

using namespace patience;
using namespace patience::grader;

namespace {

// Independent re-implementation used as the property-test oracle: scan every
// position for the tag, match braces with an explicit stack, keep the last
// balanced content.
std::optional<std::string> oracle_boxed(const std::string& text) {
  constexpr const char* kTag = "\\boxed{";
  std::optional<std::string> best;
  for (std::size_t pos = 0; pos + 7 <= text.size(); ++pos) {
    if (text.compare(pos, 7, kTag) != 0) continue;
    std::vector<char> stack{'{'};
    std::string content;
    for (std::size_t i = pos + 7; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '}') {
        stack.pop_back();
        if (stack.empty()) {
          best = content;
          break;
        }
      } else if (c == '{') {
        stack.push_back('{');
      }
      content.push_back(c);
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("grader") {
  TEST_CASE("oracle corpus scores 100% agreement") {
    const auto cases = grader_cases::all();
    REQUIRE(cases.size() >= 50);
    for (const auto& c : cases) {
      CAPTURE(c.text);
      CAPTURE(c.gold);
      CHECK(grade_solution(c.text, c.gold, EquivalenceConfig::exact()) == c.expected);
    }
  }

  TEST_CASE("extract_boxed returns last balanced content") {
    CHECK(extract_boxed("is \\boxed{8}.") == "8");
    CHECK(extract_boxed("like \\boxed{2.5}") == "2.5");
    CHECK(extract_boxed("\\boxed{\\frac{1}{2}} then \\boxed{x+1}") == "x+1");
    CHECK(extract_boxed("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
    CHECK_FALSE(extract_boxed("\\boxed{unclosed").has_value());
    CHECK_FALSE(extract_boxed("nothing here").has_value());
    CHECK(extract_boxed("\\boxed{a} \\boxed{oops").value() == "a");
    CHECK(extract_boxed("\\boxed{\\boxed{7}}") == "7");
  }

  TEST_CASE("extract_boxed agrees with stack oracle on random brace soup") {
    std::mt19937 rng(20240814);
    const std::string alphabet = "{}{}\\boxedx1 ";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(0, 60);
    std::uniform_int_distribution<int> coin(0, 4);
    for (int trial = 0; trial < 2000; ++trial) {
      std::string text;
      const int n = len(rng);
      for (int k = 0; k < n; ++k) {
        if (coin(rng) == 0) text += "\\boxed{";
        text += alphabet[pick(rng)];
      }
      CAPTURE(text);
      CHECK(extract_boxed(text) == oracle_boxed(text));
    }
  }

  TEST_CASE("extraction rule priority and labels") {
    auto a = extract_final_answer("The answer is: 8");
    REQUIRE(a.has_value());
    CHECK(a->raw == "8");
    CHECK(a->rule == ExtractionRule::AnswerIsPhrase);

    auto b = extract_final_answer("\\boxed{8}\nThe answer is: 9\n#### 10");
    REQUIRE(b.has_value());
    CHECK(b->canonical == "8");
    CHECK(b->rule == ExtractionRule::Boxed);

    auto c = extract_final_answer("gold line\n#### 72");
    REQUIRE(c.has_value());
    CHECK(c->canonical == "72");
    CHECK(c->rule == ExtractionRule::HashMarks);

    CHECK_FALSE(extract_final_answer("no answer here").has_value());

    CHECK(to_string(ExtractionRule::Boxed) == "boxed");
    CHECK(to_string(ExtractionRule::AnswerIsPhrase) == "answer_is_phrase");
    CHECK(to_string(ExtractionRule::HashMarks) == "hash_marks");
  }

  TEST_CASE("a rule whose match normalizes empty defers to the next rule") {
    auto a = extract_final_answer("\\boxed{}\nThe answer is: 8");
    REQUIRE(a.has_value());
    CHECK(a->rule == ExtractionRule::AnswerIsPhrase);
    CHECK(a->canonical == "8");

    auto b = extract_final_answer("The answer is:\n#### 72");
    REQUIRE(b.has_value());
    CHECK(b->rule == ExtractionRule::HashMarks);
  }

  TEST_CASE("normalize_answer canonical forms") {
    CHECK(normalize_answer("1,234.") == "1234");
    CHECK(normalize_answer("\\frac{1}{2}") == "1/2");
    CHECK(normalize_answer("8") == "8");
    CHECK(normalize_answer("  8  ") == "8");
    CHECK(normalize_answer("$8$") == "8");
    CHECK(normalize_answer("\\(8\\)") == "8");
    CHECK(normalize_answer("\\[8\\]") == "8");
    CHECK(normalize_answer("{8}") == "8");
    CHECK(normalize_answer("\\$8") == "8");
    CHECK(normalize_answer("$5") == "5");
    CHECK(normalize_answer("50\\%") == "50");
    CHECK(normalize_answer("50%") == "50");
    CHECK(normalize_answer("8 points") == "8");
    CHECK(normalize_answer("8 points.") == "8");
    CHECK(normalize_answer("East") == "east");
    CHECK(normalize_answer("8.0") == "8");
    CHECK(normalize_answer("08") == "8");
    CHECK(normalize_answer("-0") == "0");
    CHECK(normalize_answer(".5") == "0.5");
    CHECK(normalize_answer("6/8") == "3/4");
    CHECK(normalize_answer("\\frac{6}{8}") == "3/4");
    CHECK(normalize_answer("-6/8") == "-3/4");
    CHECK(normalize_answer("6/-8") == "-3/4");
    CHECK(normalize_answer("x+1") == "x+1");
    CHECK(normalize_answer("12,34") == "12,34");
    CHECK(normalize_answer("1,2345") == "1,2345");
    CHECK(normalize_answer("$\\frac{1}{2}$") == "1/2");
  }

  TEST_CASE("normalize_answer is idempotent") {
    std::vector<std::string> pool = {"1,234.",  "\\frac{1}{2}", "8 points", "$8$",  "50%",
                                     "x+1",     "12,34",        "-0",       ".5",   "East",
                                     "\\$1,234.50", "6/8",      "",         "   ", "\\frac{6}{8} extra"};
    for (const auto& c : grader_cases::all()) pool.emplace_back(c.gold);
    for (const auto& s : pool) {
      CAPTURE(s);
      const std::string once = normalize_answer(s);
      CHECK(normalize_answer(once) == once);
    }
  }

  TEST_CASE("answers_equivalent exact and tolerant") {
    const auto exact = EquivalenceConfig::exact();
    const auto tol = EquivalenceConfig::tolerant();

    CHECK(answers_equivalent("8", "8.0", exact));
    CHECK(answers_equivalent("1/2", "0.5", exact));
    CHECK_FALSE(answers_equivalent("8", "9", exact));
    CHECK_FALSE(answers_equivalent("x+1", "x + 1", exact));

    CHECK_FALSE(answers_equivalent("0.3333333", "1/3", exact));
    CHECK(answers_equivalent("0.3333333", "1/3", tol));
    CHECK_FALSE(answers_equivalent("0.34", "1/3", tol));

    std::vector<std::string> pool = {"8", "8.0", "1/2", "0.5", "-13/4", "-3.25", "x+1", "12,34"};
    for (const auto& a : pool) {
      CHECK(answers_equivalent(a, a, exact));
      for (const auto& b : pool) {
        CHECK(answers_equivalent(a, b, exact) == answers_equivalent(b, a, exact));
        CHECK(answers_equivalent(a, b, tol) == answers_equivalent(b, a, tol));
      }
    }
  }

  TEST_CASE("grade_solution rejects empty gold") {
    CHECK_THROWS_AS(grade_solution("x", "", EquivalenceConfig::exact()), EmptyGoldError);
    CHECK_THROWS_AS(grade_solution("x", "  $$  ", EquivalenceConfig::exact()), EmptyGoldError);
  }

  TEST_CASE("worked example grades from both solution styles") {
    const auto cfg = EquivalenceConfig::exact();
    CHECK(grade_solution(sample::kConciseSolution, sample::kGoldAnswer, cfg) == Verdict::Correct);
    CHECK(grade_solution(sample::kPatientSolution, sample::kGoldAnswer, cfg) == Verdict::Correct);
    const auto concise = extract_final_answer(sample::kConciseSolution);
    REQUIRE(concise.has_value());
    CHECK(concise->rule == ExtractionRule::AnswerIsPhrase);
    const auto patient = extract_final_answer(sample::kPatientSolution);
    REQUIRE(patient.has_value());
    CHECK(patient->rule == ExtractionRule::Boxed);
    CHECK(patient->canonical == concise->canonical);
  }

  TEST_CASE("version tag is stable") {
    CHECK(version() == "1.0.0");
  }
}
