#include "patience/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "patience/prompts.hpp"

namespace patience::eval {
namespace {

using nlohmann::json;

std::string fixed1(double value, bool forced_sign) {
  char buf[64];
  std::snprintf(buf, sizeof buf, forced_sign ? "%+.1f" : "%.1f", value);
  return buf;
}

std::string row(const std::string& method, const std::string& accuracy, const std::string& time) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %12s %10s\n", method.c_str(), accuracy.c_str(),
                time.c_str());
  return buf;
}

}  // namespace

LatencyStats latency_stats(std::vector<double> samples) {
  if (samples.empty()) throw EmptySamplesError();
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  const auto nearest_rank = [&](double p) {
    // 1e-9 absorbs float error in p*n so exact ranks (0.5 * 4 = 2) stay exact
    const auto k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    return samples[std::clamp<std::size_t>(k, 1, samples.size()) - 1];
  };
  return {mean, nearest_rank(0.50), nearest_rank(0.95)};
}

EvalReport evaluate(const std::vector<ProblemRecord>& problems, gateway::Gateway& gw,
                    const GenParams& params, const grader::EquivalenceConfig& eq,
                    const std::string& corpus_name) {
  EvalReport report;
  report.corpus_name = corpus_name;
  report.n = static_cast<std::int64_t>(problems.size());
  if (problems.empty()) return report;

  std::vector<std::string> prompts;
  prompts.reserve(problems.size());
  for (const auto& p : problems) prompts.push_back(prompts::render_eval_prompt(p.problem));

  const auto outcomes = gw.complete_batch(prompts, params, gw.config().max_in_flight);

  std::vector<double> latencies;
  latencies.reserve(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    PerProblemResult r;
    r.id = problems[i].id;
    if (outcomes[i].ok()) {
      r.latency_s = outcomes[i].result->latency_s;
      const std::string gold = grader::normalize_answer(problems[i].gold_answer);
      if (gold.empty()) throw grader::EmptyGoldError("empty gold answer for " + r.id);
      if (const auto ans = grader::extract_final_answer(outcomes[i].result->text)) {
        r.extracted_answer = ans->canonical;
        r.verdict = grader::answers_equivalent(ans->canonical, gold, eq) ? Verdict::Correct
                                                                         : Verdict::Incorrect;
      } else {
        r.verdict = Verdict::Unextractable;
      }
    } else {
      r.verdict = Verdict::Unextractable;
      r.error = outcomes[i].error->what();
    }
    latencies.push_back(r.latency_s);
    if (r.verdict == Verdict::Correct) ++report.n_correct;
    report.per_problem.push_back(std::move(r));
  }
  report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n);
  report.latency = latency_stats(std::move(latencies));
  return report;
}

json report_to_json(const EvalReport& report) {
  json per_problem = json::array();
  for (const auto& r : report.per_problem) {
    json row{{"id", r.id}, {"verdict", to_string(r.verdict)}, {"latency_s", r.latency_s}};
    if (r.extracted_answer) row["extracted_answer"] = *r.extracted_answer;
    if (r.error) row["error"] = *r.error;
    per_problem.push_back(std::move(row));
  }
  return json{{"corpus_name", report.corpus_name},
              {"n", report.n},
              {"n_correct", report.n_correct},
              {"accuracy", report.accuracy},
              {"latency", {{"mean_s", report.latency.mean_s},
                           {"p50_s", report.latency.p50_s},
                           {"p95_s", report.latency.p95_s}}},
              {"per_problem", std::move(per_problem)}};
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport report;
    report.corpus_name = j.at("corpus_name").get<std::string>();
    report.n = j.at("n").get<std::int64_t>();
    report.n_correct = j.at("n_correct").get<std::int64_t>();
    report.accuracy = j.at("accuracy").get<double>();
    const json& lat = j.at("latency");
    report.latency = {lat.at("mean_s").get<double>(), lat.at("p50_s").get<double>(),
                      lat.at("p95_s").get<double>()};
    for (const json& row : j.at("per_problem")) {
      PerProblemResult r;
      r.id = row.at("id").get<std::string>();
      r.verdict = verdict_from_string(row.at("verdict").get<std::string>());
      r.latency_s = row.at("latency_s").get<double>();
      if (row.contains("extracted_answer")) r.extracted_answer = row["extracted_answer"].get<std::string>();
      if (row.contains("error")) r.error = row["error"].get<std::string>();
      report.per_problem.push_back(std::move(r));
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
}

Comparison compare_reports(const EvalReport& baseline, const EvalReport& candidate) {
  if (baseline.corpus_name != candidate.corpus_name || baseline.n != candidate.n)
    throw CorpusMismatchError("reports cover different corpora: \"" + baseline.corpus_name +
                              "\" (n=" + std::to_string(baseline.n) + ") vs \"" +
                              candidate.corpus_name + "\" (n=" + std::to_string(candidate.n) +
                              ")");
  Comparison c;
  c.corpus_name = baseline.corpus_name;
  c.baseline_accuracy = baseline.accuracy;
  c.candidate_accuracy = candidate.accuracy;
  c.accuracy_delta_points = (candidate.accuracy - baseline.accuracy) * 100.0;
  c.baseline_time_s = baseline.latency.mean_s;
  c.candidate_time_s = candidate.latency.mean_s;
  c.time_delta_s = candidate.latency.mean_s - baseline.latency.mean_s;
  return c;
}

std::string render_comparison(const Comparison& c) {
  std::string out = row("method", "accuracy (%)", "time (s)");
  out += row("baseline", fixed1(c.baseline_accuracy * 100.0, false),
             fixed1(c.baseline_time_s, false));
  out += row("candidate", fixed1(c.candidate_accuracy * 100.0, false),
             fixed1(c.candidate_time_s, false));
  out += row("delta", fixed1(c.accuracy_delta_points, true), fixed1(c.time_delta_s, true));
  return out;
}

json comparison_to_json(const Comparison& c) {
  return json{{"corpus_name", c.corpus_name},
              {"baseline_accuracy", c.baseline_accuracy},
              {"candidate_accuracy", c.candidate_accuracy},
              {"accuracy_delta_points", c.accuracy_delta_points},
              {"baseline_time_s", c.baseline_time_s},
              {"candidate_time_s", c.candidate_time_s},
              {"time_delta_s", c.time_delta_s}};
}

}  // namespace patience::eval
