#include "patience/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace patience {

std::string to_string(SolutionStyle s) {
  return s == SolutionStyle::Concise ? "concise" : "patient";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Correct: return "correct";
    case Verdict::Incorrect: return "incorrect";
    case Verdict::Unextractable: return "unextractable";
  }
  return "unextractable";
}

SolutionStyle solution_style_from_string(const std::string& s) {
  if (s == "concise") return SolutionStyle::Concise;
  if (s == "patient") return SolutionStyle::Patient;
  throw Error("unknown solution style: " + s);
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "correct") return Verdict::Correct;
  if (s == "incorrect") return Verdict::Incorrect;
  if (s == "unextractable") return Verdict::Unextractable;
  throw Error("unknown verdict: " + s);
}

namespace corpus {
namespace {

using nlohmann::json;

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string get_string(const json& j, const char* key, const std::filesystem::path& path,
                       int line_no, bool allow_empty = false) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw MalformedLineError(path, line_no, std::string("missing or non-string \"") + key + "\"");
  auto value = it->get<std::string>();
  if (value.empty() && !allow_empty)
    throw MalformedLineError(path, line_no, std::string("empty \"") + key + "\"");
  return value;
}

double get_number(const json& j, const char* key, const std::filesystem::path& path, int line_no) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw MalformedLineError(path, line_no, std::string("missing or non-numeric \"") + key + "\"");
  return it->get<double>();
}

json params_to_json(const GenParams& p) {
  json j{{"model", p.model}, {"temperature", p.temperature}, {"max_tokens", p.max_tokens}};
  if (p.seed) j["seed"] = *p.seed;
  return j;
}

GenParams params_from_json(const json& j, const std::filesystem::path& path, int line_no) {
  if (!j.is_object()) throw MalformedLineError(path, line_no, "\"gen_params\" is not an object");
  GenParams p;
  p.model = get_string(j, "model", path, line_no, /*allow_empty=*/true);
  p.temperature = get_number(j, "temperature", path, line_no);
  p.max_tokens = static_cast<int>(get_number(j, "max_tokens", path, line_no));
  if (const auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer())
      throw MalformedLineError(path, line_no, "non-integer \"seed\"");
    p.seed = it->get<std::int64_t>();
  }
  return p;
}

// Runs fn over every non-blank line, translating JSON parse failures into
// MalformedLineError with the 1-based line number.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  if (!std::filesystem::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedLineError(path, line_no, e.what());
    }
    if (!j.is_object()) throw MalformedLineError(path, line_no, "line is not a JSON object");
    fn(j, line_no);
  }
}

template <typename Record>
std::size_t write_records(const std::filesystem::path& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
  return records.size();
}

}  // namespace

json to_json(const ProblemRecord& r) {
  json j{{"id", r.id}, {"problem", r.problem}, {"answer", r.gold_answer}};
  if (!r.source.empty()) j["source"] = r.source;
  return j;
}

json to_json(const CandidateSolution& s) {
  json j{{"problem_id", s.problem_id},
         {"text", s.text},
         {"style", to_string(s.style)},
         {"verdict", to_string(s.verdict)},
         {"gen_params", params_to_json(s.gen_params)},
         {"latency_s", s.latency_s}};
  if (s.extracted_answer) j["extracted_answer"] = *s.extracted_answer;
  return j;
}

json to_json(const PreferencePair& p) {
  return json{{"problem_id", p.problem_id},
              {"prompt", p.prompt},
              {"chosen", p.chosen},
              {"rejected", p.rejected},
              {"meta", p.meta}};
}

std::vector<ProblemRecord> load_problems(const std::filesystem::path& path) {
  std::vector<ProblemRecord> records;
  std::set<std::string> seen;
  for_each_json_line(path, [&](json& j, int line_no) {
    ProblemRecord r;
    r.id = get_string(j, "id", path, line_no);
    r.problem = get_string(j, "problem", path, line_no);
    r.gold_answer = get_string(j, "answer", path, line_no);
    if (!seen.insert(r.id).second) throw DuplicateIdError(r.id);
    j.erase("id");
    j.erase("problem");
    j.erase("answer");
    if (j.empty()) {
      r.source = "";
    } else if (j.size() == 1 && j.contains("source") && j["source"].is_string()) {
      r.source = j["source"].get<std::string>();
    } else {
      r.source = j.dump();  // unknown extras preserved, not rejected
    }
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<CandidateSolution> load_solutions(const std::filesystem::path& path) {
  std::vector<CandidateSolution> records;
  for_each_json_line(path, [&](const json& j, int line_no) {
    CandidateSolution s;
    s.problem_id = get_string(j, "problem_id", path, line_no);
    s.text = get_string(j, "text", path, line_no, /*allow_empty=*/true);
    try {
      s.style = solution_style_from_string(get_string(j, "style", path, line_no));
      s.verdict = verdict_from_string(get_string(j, "verdict", path, line_no));
    } catch (const MalformedLineError&) {
      throw;
    } catch (const Error& e) {
      throw MalformedLineError(path, line_no, e.what());
    }
    if (const auto it = j.find("extracted_answer"); it != j.end() && !it->is_null()) {
      if (!it->is_string())
        throw MalformedLineError(path, line_no, "non-string \"extracted_answer\"");
      s.extracted_answer = it->get<std::string>();
    }
    if ((s.verdict == Verdict::Unextractable) == s.extracted_answer.has_value())
      throw MalformedLineError(path, line_no,
                               "verdict is inconsistent with extracted_answer presence");
    const auto it = j.find("gen_params");
    if (it == j.end()) throw MalformedLineError(path, line_no, "missing \"gen_params\"");
    s.gen_params = params_from_json(*it, path, line_no);
    s.latency_s = get_number(j, "latency_s", path, line_no);
    if (s.latency_s < 0) throw MalformedLineError(path, line_no, "negative \"latency_s\"");
    records.push_back(std::move(s));
  });
  return records;
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
  std::vector<PreferencePair> records;
  for_each_json_line(path, [&](const json& j, int line_no) {
    PreferencePair p;
    p.problem_id = get_string(j, "problem_id", path, line_no);
    p.prompt = get_string(j, "prompt", path, line_no, /*allow_empty=*/true);
    p.chosen = get_string(j, "chosen", path, line_no);
    p.rejected = get_string(j, "rejected", path, line_no);
    if (p.chosen == p.rejected)
      throw MalformedLineError(path, line_no, "\"chosen\" and \"rejected\" are identical");
    if (const auto it = j.find("meta"); it != j.end()) {
      if (!it->is_object()) throw MalformedLineError(path, line_no, "non-object \"meta\"");
      p.meta = *it;
    }
    records.push_back(std::move(p));
  });
  return records;
}

std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<ProblemRecord>& records) {
  return write_records(path, records);
}

std::size_t write_jsonl(const std::filesystem::path& path,
                        const std::vector<CandidateSolution>& records) {
  return write_records(path, records);
}

std::size_t write_jsonl(const std::filesystem::path& path,
                        const std::vector<PreferencePair>& records) {
  return write_records(path, records);
}

void write_stats(const std::filesystem::path& path, const PipelineStats& stats) {
  json j{{"n_problems", stats.n_problems},
         {"n_generated", stats.n_generated},
         {"n_correct_concise", stats.n_correct_concise},
         {"n_refined", stats.n_refined},
         {"n_correct_refined", stats.n_correct_refined},
         {"n_pairs_emitted", stats.n_pairs_emitted},
         {"drop_reasons", json::object()}};
  for (const auto& [reason, count] : stats.drop_reasons) j["drop_reasons"][reason] = count;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

PipelineStats load_stats(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedLineError(path, 1, e.what());
  }
  PipelineStats stats;
  stats.n_problems = static_cast<std::int64_t>(get_number(j, "n_problems", path, 1));
  stats.n_generated = static_cast<std::int64_t>(get_number(j, "n_generated", path, 1));
  stats.n_correct_concise = static_cast<std::int64_t>(get_number(j, "n_correct_concise", path, 1));
  stats.n_refined = static_cast<std::int64_t>(get_number(j, "n_refined", path, 1));
  stats.n_correct_refined = static_cast<std::int64_t>(get_number(j, "n_correct_refined", path, 1));
  stats.n_pairs_emitted = static_cast<std::int64_t>(get_number(j, "n_pairs_emitted", path, 1));
  if (const auto it = j.find("drop_reasons"); it != j.end() && it->is_object()) {
    for (const auto& [reason, count] : it->items())
      stats.drop_reasons[reason] = count.get<std::int64_t>();
  }
  return stats;
}

}  // namespace corpus
}  // namespace patience
