#include "patience/grader.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>

namespace patience::grader {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string trim(std::string_view s) { return std::string(trim_view(s)); }

struct Rational {
  long long num = 0;
  long long den = 1;  // always > 0
};

Rational reduce(long long num, long long den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (num == 0) return {0, 1};
  const long long g = std::gcd(num < 0 ? -num : num, den);
  return {num / g, den / g};
}

std::optional<long long> parse_ll(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return std::nullopt;
  long long v = 0;
  for (; i < s.size(); ++i) {
    if (!is_digit(s[i])) return std::nullopt;
    const int d = s[i] - '0';
    if (v > (std::numeric_limits<long long>::max() - d) / 10) return std::nullopt;
    v = v * 10 + d;
  }
  return neg ? -v : v;
}

std::optional<Rational> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    i = 1;
  }
  long long num = 0;
  int frac_digits = -1;
  bool any_digit = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '.') {
      if (frac_digits >= 0) return std::nullopt;
      frac_digits = 0;
      continue;
    }
    if (!is_digit(c)) return std::nullopt;
    const int d = c - '0';
    if (num > (std::numeric_limits<long long>::max() - d) / 10) return std::nullopt;
    num = num * 10 + d;
    any_digit = true;
    if (frac_digits >= 0 && ++frac_digits > 17) return std::nullopt;
  }
  if (!any_digit) return std::nullopt;
  long long den = 1;
  for (int k = 0; k < std::max(frac_digits, 0); ++k) den *= 10;
  return reduce(neg ? -num : num, den);
}

std::optional<Rational> parse_slash_fraction(std::string_view s) {
  const std::size_t slash = s.find('/');
  if (slash == std::string_view::npos || s.find('/', slash + 1) != std::string_view::npos)
    return std::nullopt;
  const auto num = parse_ll(trim_view(s.substr(0, slash)));
  const auto den = parse_ll(trim_view(s.substr(slash + 1)));
  if (!num || !den || *den == 0) return std::nullopt;
  return reduce(*num, *den);
}

std::optional<Rational> parse_latex_frac(std::string_view s) {
  constexpr std::string_view kFrac = "\\frac";
  if (s.substr(0, kFrac.size()) != kFrac) return std::nullopt;
  std::size_t i = kFrac.size();
  auto read_group = [&](std::string_view* out) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size() || s[i] != '{') return false;
    int depth = 1;
    const std::size_t start = ++i;
    for (; i < s.size(); ++i) {
      if (s[i] == '{') ++depth;
      if (s[i] == '}' && --depth == 0) break;
    }
    if (depth != 0) return false;
    *out = s.substr(start, i - start);
    ++i;
    return true;
  };
  std::string_view a, b;
  if (!read_group(&a) || !read_group(&b)) return std::nullopt;
  while (i < s.size() && is_space(s[i])) ++i;
  if (i != s.size()) return std::nullopt;
  const auto num = parse_ll(trim_view(a));
  const auto den = parse_ll(trim_view(b));
  if (!num || !den || *den == 0) return std::nullopt;
  return reduce(*num, *den);
}

std::optional<Rational> parse_any_numeric(std::string_view s) {
  if (auto r = parse_decimal(s)) return r;
  if (auto r = parse_slash_fraction(s)) return r;
  if (auto r = parse_latex_frac(s)) return r;
  return std::nullopt;
}

std::string render_rational(Rational r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

// True when the leading '{' closes exactly at the final character.
bool brace_wraps_whole(std::string_view s) {
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}') {
      if (--depth < 0) return false;
      if (depth == 0) return i + 1 == s.size();
    }
  }
  return false;
}

// Digit-grouping comma: digit before, exactly three digits after.
bool is_thousands_comma(const std::string& s, std::size_t i) {
  if (i == 0 || !is_digit(s[i - 1])) return false;
  if (i + 4 > s.size()) return false;
  if (!is_digit(s[i + 1]) || !is_digit(s[i + 2]) || !is_digit(s[i + 3])) return false;
  if (i + 4 < s.size() && is_digit(s[i + 4])) return false;
  return true;
}

// Pure decimal canonicalization, textual only: leading zeros dropped,
// trailing fractional zeros dropped, "-0" collapsed to "0".
std::optional<std::string> canonical_decimal(const std::string& s) {
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    neg = s[i] == '-';
    ++i;
  }
  std::string int_part, frac_part;
  bool dot = false, any_digit = false;
  for (; i < s.size(); ++i) {
    if (s[i] == '.') {
      if (dot) return std::nullopt;
      dot = true;
      continue;
    }
    if (!is_digit(s[i])) return std::nullopt;
    any_digit = true;
    (dot ? frac_part : int_part) += s[i];
  }
  if (!any_digit) return std::nullopt;
  const std::size_t nz = int_part.find_first_not_of('0');
  int_part = nz == std::string::npos ? "0" : int_part.substr(nz);
  const std::size_t last = frac_part.find_last_not_of('0');
  frac_part = last == std::string::npos ? "" : frac_part.substr(0, last + 1);
  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (out == "0") return out;
  return neg ? "-" + out : out;
}

// Remainder of the line after the LAST occurrence of needle; search is done
// on haystack_lc (pre-lowercased when the needle is case-insensitive).
std::optional<std::string> last_line_remainder(std::string_view text, std::string_view haystack,
                                               std::string_view needle) {
  const std::size_t pos = haystack.rfind(needle);
  if (pos == std::string_view::npos) return std::nullopt;
  const std::size_t from = pos + needle.size();
  std::size_t end = text.find('\n', from);
  if (end == std::string_view::npos) end = text.size();
  return trim(text.substr(from, end - from));
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string to_string(ExtractionRule rule) {
  switch (rule) {
    case ExtractionRule::Boxed: return "boxed";
    case ExtractionRule::AnswerIsPhrase: return "answer_is_phrase";
    case ExtractionRule::HashMarks: return "hash_marks";
  }
  return "boxed";
}

std::optional<std::string> extract_boxed(std::string_view text) {
  constexpr std::string_view kTag = "\\boxed{";
  std::optional<std::string> last;
  std::size_t pos = 0;
  while ((pos = text.find(kTag, pos)) != std::string_view::npos) {
    const std::size_t start = pos + kTag.size();
    int depth = 1;
    std::size_t i = start;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) break;
    }
    if (depth == 0) last = std::string(text.substr(start, i - start));
    pos += kTag.size();
  }
  return last;
}

std::optional<ExtractedAnswer> extract_final_answer(std::string_view text) {
  if (const auto boxed = extract_boxed(text)) {
    ExtractedAnswer ans{trim(*boxed), normalize_answer(*boxed), ExtractionRule::Boxed};
    if (!ans.canonical.empty()) return ans;
  }
  const std::string lower = lowercase(text);
  if (const auto raw = last_line_remainder(text, lower, "the answer is:")) {
    ExtractedAnswer ans{*raw, normalize_answer(*raw), ExtractionRule::AnswerIsPhrase};
    if (!ans.canonical.empty()) return ans;
  }
  if (const auto raw = last_line_remainder(text, text, "####")) {
    ExtractedAnswer ans{*raw, normalize_answer(*raw), ExtractionRule::HashMarks};
    if (!ans.canonical.empty()) return ans;
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view raw) {
  std::string s = trim(raw);

  for (bool stripped = true; stripped && s.size() >= 2;) {
    stripped = false;
    if (s.front() == '$' && s.back() == '$') {
      s = trim(std::string_view(s).substr(1, s.size() - 2));
      stripped = true;
    } else if (s.size() >= 4 && s.starts_with("\\(") && s.ends_with("\\)")) {
      s = trim(std::string_view(s).substr(2, s.size() - 4));
      stripped = true;
    } else if (s.size() >= 4 && s.starts_with("\\[") && s.ends_with("\\]")) {
      s = trim(std::string_view(s).substr(2, s.size() - 4));
      stripped = true;
    } else if (s.front() == '{' && s.back() == '}' && brace_wraps_whole(s)) {
      s = trim(std::string_view(s).substr(1, s.size() - 2));
      stripped = true;
    }
  }

  s = lowercase(s);

  if (s.starts_with("\\$")) {
    s = trim(std::string_view(s).substr(2));
  } else if (s.starts_with("$")) {
    s = trim(std::string_view(s).substr(1));
  }

  if (s.ends_with("\\%")) {
    s = trim(std::string_view(s).substr(0, s.size() - 2));
  } else if (s.ends_with("%")) {
    s = trim(std::string_view(s).substr(0, s.size() - 1));
  }

  std::string no_commas;
  no_commas.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && is_thousands_comma(s, i)) continue;
    no_commas.push_back(s[i]);
  }
  s = std::move(no_commas);

  while (!s.empty() && s.back() == '.') s.pop_back();
  s = trim(s);

  // "8 points" -> "8": drop trailing unit words when the head is numeric
  const std::size_t ws = s.find_first_of(" \t");
  if (ws != std::string::npos) {
    const std::string head = s.substr(0, ws);
    const std::string_view tail = trim_view(std::string_view(s).substr(ws + 1));
    const bool tail_is_words =
        !tail.empty() &&
        std::all_of(tail.begin(), tail.end(), [](char c) { return is_alpha(c) || c == ' '; });
    if (tail_is_words && parse_any_numeric(head)) s = head;
  }

  if (const auto frac = parse_latex_frac(s)) return render_rational(*frac);
  if (s.find('/') != std::string::npos) {
    if (const auto frac = parse_slash_fraction(s)) return render_rational(*frac);
  }
  if (const auto dec = canonical_decimal(s)) return *dec;
  return s;
}

bool answers_equivalent(const std::string& a, const std::string& b, const EquivalenceConfig& cfg) {
  if (a == b) return true;
  const auto ra = parse_any_numeric(a);
  const auto rb = parse_any_numeric(b);
  if (!ra || !rb) return false;
  const __int128 lhs = static_cast<__int128>(ra->num) * rb->den;
  const __int128 rhs = static_cast<__int128>(rb->num) * ra->den;
  if (lhs == rhs) return true;
  if (cfg.rel_tol <= 0.0 && cfg.abs_tol <= 0.0) return false;
  const double x = static_cast<double>(ra->num) / static_cast<double>(ra->den);
  const double y = static_cast<double>(rb->num) / static_cast<double>(rb->den);
  return std::abs(x - y) <= std::max(cfg.abs_tol, cfg.rel_tol * std::max(std::abs(x), std::abs(y)));
}

Verdict grade_solution(std::string_view solution_text, const std::string& gold_answer,
                       const EquivalenceConfig& cfg) {
  const std::string gold = normalize_answer(gold_answer);
  if (gold.empty()) throw EmptyGoldError("gold answer is empty");
  const auto extracted = extract_final_answer(solution_text);
  if (!extracted) return Verdict::Unextractable;
  return answers_equivalent(extracted->canonical, gold, cfg) ? Verdict::Correct
                                                             : Verdict::Incorrect;
}

std::string_view version() { return "1.0.0"; }

}  // namespace patience::grader
