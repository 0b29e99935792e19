#include "patience/prompts.hpp"

namespace patience::prompts {
namespace {

constexpr std::string_view kGenerate =
    "{problem}\n"
    "\n"
    "Please think step by step to solve this problem.\n"
    "You need to give the number and title of every step, for example:\n"
    "\n"
    "Step 1: List all the ......\n"
    "Step 2: Calculate the ......\n"
    "\n"
    "Now, begin your solution.";

constexpr std::string_view kRefine =
    "Here is a math problem:\n"
    "{problem}\n"
    "\n"
    "And this is its reference solution:\n"
    "{solution}\n"
    "\n"
    "However, as a novice, I cannot very clearly understand some steps of it. "
    "Maybe some operations are too direct and too brief.\n"
    "Therefore, please rewrite the whole solution with more patience and more "
    "detailed and understandable steps.\n"
    "For example, you can convert a high-level operation into the combination "
    "of more intuitive sub-operations.\n"
    "\n"
    "Multiplication within 100 can be considered as simple and does not need "
    "to be split. However, you can use vertical forms for calculating large "
    "numbers.\n"
    "If you need to write down the final answer in the last step, please put "
    "it in a box like \"\\boxed{2.5}\"\n"
    "\n"
    "Now directly begin your new solution.";

constexpr std::string_view kEval =
    "{problem}\n"
    "Please reason step by step, and put your final answer within \\boxed{}";

}  // namespace

const PromptTemplate& generation_template() {
  static const PromptTemplate tpl{PromptKind::Generate, kGenerate};
  return tpl;
}

const PromptTemplate& refinement_template() {
  static const PromptTemplate tpl{PromptKind::Refine, kRefine};
  return tpl;
}

const PromptTemplate& eval_template() {
  static const PromptTemplate tpl{PromptKind::Eval, kEval};
  return tpl;
}

std::string render_template(std::string_view tpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> subs) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      bool substituted = false;
      for (const auto& [key, value] : subs) {
        const std::size_t close = i + 1 + key.size();
        if (close < tpl.size() && tpl[close] == '}' &&
            tpl.compare(i + 1, key.size(), key) == 0) {
          out.append(value);
          i = close + 1;
          substituted = true;
          break;
        }
      }
      if (substituted) continue;
    }
    out.push_back(tpl[i]);
    ++i;
  }
  return out;
}

std::string render_generation_prompt(std::string_view problem) {
  if (problem.empty()) throw EmptyProblemError("problem text is empty");
  return render_template(generation_template().text, {{"problem", problem}});
}

std::string render_refinement_prompt(std::string_view problem, std::string_view solution) {
  if (problem.empty()) throw EmptyProblemError("problem text is empty");
  if (solution.empty()) throw EmptySolutionError("solution text is empty");
  return render_template(refinement_template().text,
                         {{"problem", problem}, {"solution", solution}});
}

std::string render_eval_prompt(std::string_view problem) {
  if (problem.empty()) throw EmptyProblemError("problem text is empty");
  return render_template(eval_template().text, {{"problem", problem}});
}

}  // namespace patience::prompts
