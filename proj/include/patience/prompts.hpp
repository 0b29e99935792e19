#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "patience/errors.hpp"

namespace patience::prompts {

enum class PromptKind { Generate, Refine, Eval };

struct PromptTemplate {
  PromptKind name;
  std::string_view text;  // contains {problem} / {solution} placeholders
};

const PromptTemplate& generation_template();
const PromptTemplate& refinement_template();
const PromptTemplate& eval_template();

class EmptyProblemError : public Error {
 public:
  using Error::Error;
};

class EmptySolutionError : public Error {
 public:
  using Error::Error;
};

/// Single-pass `{placeholder}` substitution; substituted text is never
/// rescanned, so placeholder-looking content inside values stays verbatim.
std::string render_template(std::string_view tpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> subs);

std::string render_generation_prompt(std::string_view problem);
std::string render_refinement_prompt(std::string_view problem, std::string_view solution);
std::string render_eval_prompt(std::string_view problem);

}  // namespace patience::prompts
