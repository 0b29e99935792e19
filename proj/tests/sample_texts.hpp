#pragma once

// Shared fixture: one real problem with a concise solution (terse steps,
// trailing "The answer is: N") and its patient rewrite (expanded sub-steps,
// boxed final answer).

namespace sample {

inline constexpr const char* kProblem =
    "If Jeremy played a three-letter word on a triple word score to earn thirty points, and "
    "before the word score was tripled, the first and third letters were each worth one point, "
    "what was the value of the middle letter before the word score was tripled?";

inline constexpr const char* kGoldAnswer = "8";

inline constexpr const char* kConciseSolution =
    "Step 1: The word is a three-letter word, and the first and third letters were each worth "
    "one point, so the total value of the first and third letters before the word score was "
    "tripled is 1+1 = 2 points.\n"
    "Step 2: The word score was tripled to earn 30 points, so the original word score before "
    "tripling was 30/3 = 10 points.\n"
    "Step 3: The total value of the first and third letters was 2 points, and the value of the "
    "middle letter was the remaining points, so the value of the middle letter before the word "
    "score was tripled is 10 - 2 = 8 points.\n"
    "The value of the middle letter before the word score was tripled is 8.\n"
    "The answer is: 8";

inline constexpr const char* kPatientSolution =
    "Step 1: Understand the Total Points After Tripling\n"
    "Jeremy played a three-letter word on a triple word score, and he earned a total of 30 "
    "points. This means that the score for the word was tripled to reach 30 points.\n"
    "\n"
    "Step 2: Calculate the Original Score Before Tripling\n"
    "Since the word score was tripled to reach 30 points, we need to find out what the original "
    "score was before it was tripled. To do this, we divide the total points by 3:\n"
    "\\[ \\text{Original Score} = \\frac{30}{3} = 10 \\]\n"
    "So, the original score of the word before tripling was 10 points.\n"
    "\n"
    "Step 3: Determine the Contribution of the First and Third Letters\n"
    "We know that the first and third letters of the word are each worth 1 point. Therefore, "
    "the combined value of these two letters is:\n"
    "\n"
    "\\[ 1 + 1 = 2 \\]\n"
    "\n"
    "Step 4: Calculate the Value of the Middle Letter\n"
    "Now, we know that the total original score of the word (before tripling) was 10 points, "
    "and the first and third letters together account for 2 points. This means the middle "
    "letter must account for the remaining points. To find the value of the middle letter, we "
    "subtract the points contributed by the first and third letters from the original score:\n"
    "\n"
    "\\[ \\text{Value of Middle Letter} = 10 - 2 = 8 \\]\n"
    "\n"
    "Therefore, the value of the middle letter before the word score was tripled is "
    "\\(\\boxed{8}\\).";

}  // namespace sample
