#include "patience/pair_factory.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "patience/prompts.hpp"

namespace patience::pipeline {
namespace {

std::string iso8601_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void grade_into(CandidateSolution& s, const std::string& gold_answer,
                const grader::EquivalenceConfig& eq) {
  const std::string gold = grader::normalize_answer(gold_answer);
  if (gold.empty()) throw grader::EmptyGoldError("empty gold answer for " + s.problem_id);
  if (const auto ans = grader::extract_final_answer(s.text)) {
    s.extracted_answer = ans->canonical;
    s.verdict = grader::answers_equivalent(ans->canonical, gold, eq) ? Verdict::Correct
                                                                     : Verdict::Incorrect;
  } else {
    s.extracted_answer.reset();
    s.verdict = Verdict::Unextractable;
  }
}

const char* concise_drop_reason(Verdict v) {
  return v == Verdict::Incorrect ? "concise_incorrect" : "concise_unextractable";
}

const char* refined_drop_reason(Verdict v) {
  return v == Verdict::Incorrect ? "refined_incorrect" : "refined_unextractable";
}

struct ProblemOutcome {
  int gen_attempts = 0;
  bool concise_correct = false;
  bool refined = false;
  bool refined_correct = false;
  std::optional<PreferencePair> pair;
  std::string drop_reason;
  std::exception_ptr fatal;  // non-gateway failure, rethrown by the committer
};

ProblemOutcome process_one(gateway::Gateway& gw, const ProblemRecord& problem,
                           const PipelineConfig& cfg) {
  ProblemOutcome out;
  try {
    const CandidateSolution concise = generate_concise(gw, problem, cfg, &out.gen_attempts);
    if (concise.verdict != Verdict::Correct) {
      out.drop_reason = concise_drop_reason(concise.verdict);
      return out;
    }
    out.concise_correct = true;
    const CandidateSolution patient = refine_to_patient(gw, problem, concise, cfg);
    out.refined = true;
    out.refined_correct = patient.verdict == Verdict::Correct;
    std::string reason;
    out.pair = build_pair(problem, concise, patient, cfg, &reason);
    if (!out.pair) out.drop_reason = reason;
  } catch (const gateway::GatewayError&) {
    out.pair.reset();
    out.drop_reason = "gateway_error";
  } catch (...) {
    out.fatal = std::current_exception();
  }
  return out;
}

std::set<std::string> load_processed_ids(const std::filesystem::path& sidecar) {
  std::set<std::string> ids;
  if (!std::filesystem::exists(sidecar)) return ids;
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open " + sidecar.string() + " for reading");
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return checkpoint.parent_path() / "processed_ids.txt";
}

CandidateSolution generate_concise(gateway::Gateway& gw, const ProblemRecord& problem,
                                   const PipelineConfig& cfg, int* attempts_out) {
  if (attempts_out) *attempts_out = 0;
  const std::string prompt = prompts::render_generation_prompt(problem.problem);
  const int budget = std::max(1, cfg.max_gen_attempts_per_problem);
  CandidateSolution solution;
  for (int attempt = 0; attempt < budget; ++attempt) {
    const gateway::CompletionResult result = gw.complete(prompt, cfg.gen_params);
    if (attempts_out) ++*attempts_out;
    solution = CandidateSolution{problem.id, result.text, SolutionStyle::Concise,
                                 std::nullopt,  Verdict::Unextractable,
                                 cfg.gen_params, result.latency_s};
    grade_into(solution, problem.gold_answer, cfg.equivalence);
    if (solution.verdict == Verdict::Correct) break;
  }
  return solution;
}

CandidateSolution refine_to_patient(gateway::Gateway& gw, const ProblemRecord& problem,
                                    const CandidateSolution& concise, const PipelineConfig& cfg) {
  if (concise.verdict != Verdict::Correct)
    throw PreconditionError("refinement requires a correct concise solution (problem " +
                            problem.id + ")");
  const std::string prompt = prompts::render_refinement_prompt(problem.problem, concise.text);
  const gateway::CompletionResult result = gw.complete(prompt, cfg.refine_params);
  CandidateSolution patient{problem.id,          result.text, SolutionStyle::Patient,
                            std::nullopt,        Verdict::Unextractable,
                            cfg.refine_params,   result.latency_s};
  if (cfg.regrade_refined) {
    grade_into(patient, problem.gold_answer, cfg.equivalence);
  } else {
    // Passthrough mode trusts the refinement to preserve the verified answer.
    patient.extracted_answer = concise.extracted_answer;
    patient.verdict = Verdict::Correct;
  }
  return patient;
}

std::optional<PreferencePair> build_pair(const ProblemRecord& problem,
                                         const CandidateSolution& concise,
                                         const CandidateSolution& patient,
                                         const PipelineConfig& cfg, std::string* drop_reason) {
  const auto dropped = [&](const char* reason) {
    if (drop_reason) *drop_reason = reason;
    return std::nullopt;
  };
  if (concise.verdict != Verdict::Correct) return dropped(concise_drop_reason(concise.verdict));
  if (cfg.regrade_refined && patient.verdict != Verdict::Correct)
    return dropped(refined_drop_reason(patient.verdict));
  if (patient.text == concise.text) return dropped("degenerate_pair");

  PreferencePair pair;
  pair.problem_id = problem.id;
  pair.prompt = prompts::render_generation_prompt(problem.problem);
  pair.chosen = patient.text;
  pair.rejected = concise.text;
  pair.meta = nlohmann::json{{"generator_model", concise.gen_params.model},
                             {"refiner_model", patient.gen_params.model},
                             {"grader_version", std::string(grader::version())},
                             {"created_at", iso8601_utc_now()}};
  return pair;
}

PipelineResult run_pipeline(gateway::Gateway& gw, const std::vector<ProblemRecord>& problems,
                            const PipelineConfig& cfg) {
  PipelineResult result;

  std::set<std::string> already_done;
  std::ofstream pair_log, id_log;
  if (cfg.checkpoint_path) {
    const auto sidecar = sidecar_path(*cfg.checkpoint_path);
    if (cfg.resume) {
      already_done = load_processed_ids(sidecar);
      if (std::filesystem::exists(*cfg.checkpoint_path))
        result.pairs = corpus::load_pairs(*cfg.checkpoint_path);
    } else {
      std::ofstream(*cfg.checkpoint_path, std::ios::trunc);
      std::ofstream(sidecar, std::ios::trunc);
    }
    pair_log.open(*cfg.checkpoint_path, std::ios::app);
    if (!pair_log) throw IoError("cannot open " + cfg.checkpoint_path->string() + " for appending");
    id_log.open(sidecar, std::ios::app);
    if (!id_log) throw IoError("cannot open " + sidecar.string() + " for appending");
  }

  std::vector<const ProblemRecord*> todo;
  for (const auto& p : problems)
    if (already_done.count(p.id) == 0) todo.push_back(&p);
  if (todo.empty()) return result;

  std::vector<ProblemOutcome> outcomes(todo.size());
  std::vector<char> done(todo.size(), 0);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancelled{false};

  auto worker = [&] {
    for (;;) {
      if (cancelled.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      ProblemOutcome out = process_one(gw, *todo[i], cfg);
      {
        std::lock_guard lock(mu);
        outcomes[i] = std::move(out);
        done[i] = 1;
      }
      cv.notify_all();
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(std::max(1, gw.config().max_in_flight), todo.size());
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);

  const auto join_all = [&] {
    for (auto& th : threads)
      if (th.joinable()) th.join();
  };

  try {
    // Commit strictly in input order so checkpoint contents and stats never
    // depend on completion timing.
    for (std::size_t i = 0; i < todo.size(); ++i) {
      ProblemOutcome out;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return done[i] != 0; });
        out = std::move(outcomes[i]);
      }
      if (out.fatal) std::rethrow_exception(out.fatal);
      result.stats.n_problems += 1;
      result.stats.n_generated += out.gen_attempts;
      result.stats.n_correct_concise += out.concise_correct ? 1 : 0;
      result.stats.n_refined += out.refined ? 1 : 0;
      result.stats.n_correct_refined += out.refined_correct ? 1 : 0;
      if (out.pair) {
        result.stats.n_pairs_emitted += 1;
        if (cfg.checkpoint_path) {
          pair_log << corpus::to_json(*out.pair).dump() << '\n';
          pair_log.flush();
          if (!pair_log)
            throw IoError("write to " + cfg.checkpoint_path->string() + " failed");
        }
        result.pairs.push_back(std::move(*out.pair));
      } else {
        result.stats.drop_reasons[out.drop_reason] += 1;
      }
      if (cfg.checkpoint_path) {
        id_log << todo[i]->id << '\n';
        id_log.flush();
        if (!id_log)
          throw IoError("write to " + sidecar_path(*cfg.checkpoint_path).string() + " failed");
      }
    }
  } catch (...) {
    cancelled.store(true);
    join_all();
    throw;
  }
  join_all();
  return result;
}

}  // namespace patience::pipeline
