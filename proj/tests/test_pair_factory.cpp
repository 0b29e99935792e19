#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <regex>
#include <string>
#include <vector>

#include "golden_pipeline.hpp"
#include "patience/corpus.hpp"
#include "patience/grader.hpp"
#include "patience/mock_provider.hpp"
#include "patience/pair_factory.hpp"
#include "patience/prompts.hpp"
#include "sample_texts.hpp"
#include "temp_dir.hpp"

namespace {

using namespace patience;
using golden::concise_reply;
using golden::entry;
using golden::golden_problems;
using golden::golden_script;
using golden::golden_stats;
using golden::patient_reply;
using pipeline::PipelineConfig;

gateway::GatewayConfig quiet_config(int max_in_flight = 4) {
  gateway::GatewayConfig cfg;
  cfg.retry = {2, 1, 1.0, 0.0};
  cfg.max_in_flight = max_in_flight;
  cfg.jitter_seed = 11;
  return cfg;
}

struct Rig {
  std::shared_ptr<gateway::MockProvider> mock;
  gateway::Gateway gw;

  Rig(std::vector<ProblemRecord> problems, std::vector<gateway::MockScriptEntry> script,
      gateway::GatewayConfig cfg = quiet_config())
      : mock(std::make_shared<gateway::MockProvider>(std::move(problems), std::move(script))),
        gw(mock, std::move(cfg)) {}
};

PipelineConfig toy_config() {
  PipelineConfig cfg;
  cfg.gen_params.model = "gen-model";
  cfg.refine_params.model = "refine-model";
  return cfg;
}

void check_chain(const PipelineStats& s, bool retries_enabled = false) {
  CHECK(s.n_pairs_emitted <= s.n_correct_refined);
  CHECK(s.n_correct_refined <= s.n_refined);
  CHECK(s.n_refined <= s.n_correct_concise);
  CHECK(s.n_correct_concise <= s.n_generated);
  if (!retries_enabled) CHECK(s.n_generated <= s.n_problems);
  std::int64_t drops = 0;
  for (const auto& [reason, count] : s.drop_reasons) drops += count;
  CHECK(s.n_pairs_emitted + drops == s.n_problems);
}

void check_same_semantic_fields(const std::vector<PreferencePair>& a,
                                const std::vector<PreferencePair>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CAPTURE(i);
    CHECK(a[i].problem_id == b[i].problem_id);
    CHECK(a[i].prompt == b[i].prompt);
    CHECK(a[i].chosen == b[i].chosen);
    CHECK(a[i].rejected == b[i].rejected);
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

const ProblemRecord kWordProblem{"w1", sample::kProblem, "8", "unit"};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("generate_concise grades the scripted reply") {
    Rig rig({kWordProblem}, {entry("generate", "w1", sample::kConciseSolution)});
    auto cfg = toy_config();
    int attempts = -1;

    auto sol = pipeline::generate_concise(rig.gw, kWordProblem, cfg, &attempts);
    CHECK(sol.problem_id == "w1");
    CHECK(sol.style == SolutionStyle::Concise);
    CHECK(sol.text == sample::kConciseSolution);
    CHECK(sol.verdict == Verdict::Correct);
    REQUIRE(sol.extracted_answer.has_value());
    CHECK(*sol.extracted_answer == "8");
    CHECK(sol.gen_params == cfg.gen_params);
    CHECK(sol.latency_s >= 0.0);
    CHECK(attempts == 1);
  }

  TEST_CASE("generation stops at the first correct attempt") {
    Rig rig({kWordProblem}, {entry("generate", "w1", "The answer is: 8")});
    auto cfg = toy_config();
    cfg.max_gen_attempts_per_problem = 3;
    int attempts = 0;

    auto sol = pipeline::generate_concise(rig.gw, kWordProblem, cfg, &attempts);
    CHECK(sol.verdict == Verdict::Correct);
    CHECK(attempts == 1);
    CHECK(rig.mock->total_requests() == 1);
  }

  TEST_CASE("generation retries exhaust the budget on a persistently wrong reply") {
    auto cfg = toy_config();
    cfg.max_gen_attempts_per_problem = 2;

    SUBCASE("wrong answer every attempt") {
      Rig rig({kWordProblem}, {entry("generate", "w1", "The answer is: 7")});
      int attempts = 0;
      auto sol = pipeline::generate_concise(rig.gw, kWordProblem, cfg, &attempts);
      CHECK(sol.verdict == Verdict::Incorrect);
      REQUIRE(sol.extracted_answer.has_value());
      CHECK(*sol.extracted_answer == "7");
      CHECK(attempts == 2);
      CHECK(rig.mock->total_requests() == 2);
    }
    SUBCASE("no extractable answer every attempt") {
      Rig rig({kWordProblem}, {entry("generate", "w1", "Hmm, let me keep thinking.")});
      int attempts = 0;
      auto sol = pipeline::generate_concise(rig.gw, kWordProblem, cfg, &attempts);
      CHECK(sol.verdict == Verdict::Unextractable);
      CHECK_FALSE(sol.extracted_answer.has_value());
      CHECK(attempts == 2);
    }
    SUBCASE("default budget is a single attempt") {
      Rig rig({kWordProblem}, {entry("generate", "w1", "The answer is: 7")});
      int attempts = 0;
      auto sol = pipeline::generate_concise(rig.gw, kWordProblem, toy_config(), &attempts);
      CHECK(sol.verdict == Verdict::Incorrect);
      CHECK(attempts == 1);
    }
  }

  TEST_CASE("refine_to_patient rewrites and regrades") {
    Rig rig({kWordProblem}, {entry("generate", "w1", sample::kConciseSolution),
                             entry("refine", "w1", sample::kPatientSolution)});
    auto cfg = toy_config();
    auto concise = pipeline::generate_concise(rig.gw, kWordProblem, cfg);
    REQUIRE(concise.verdict == Verdict::Correct);

    auto patient = pipeline::refine_to_patient(rig.gw, kWordProblem, concise, cfg);
    CHECK(patient.problem_id == "w1");
    CHECK(patient.style == SolutionStyle::Patient);
    CHECK(patient.text == sample::kPatientSolution);
    CHECK(patient.verdict == Verdict::Correct);
    REQUIRE(patient.extracted_answer.has_value());
    CHECK(*patient.extracted_answer == "8");
    CHECK(patient.gen_params == cfg.refine_params);
  }

  TEST_CASE("refine_to_patient rejects a non-correct concise input") {
    Rig rig({kWordProblem}, {entry("refine", "w1", sample::kPatientSolution)});
    auto cfg = toy_config();
    CandidateSolution concise;
    concise.problem_id = "w1";
    concise.text = "The answer is: 7";

    concise.verdict = Verdict::Incorrect;
    CHECK_THROWS_AS(pipeline::refine_to_patient(rig.gw, kWordProblem, concise, cfg),
                    pipeline::PreconditionError);
    concise.verdict = Verdict::Unextractable;
    CHECK_THROWS_AS(pipeline::refine_to_patient(rig.gw, kWordProblem, concise, cfg),
                    pipeline::PreconditionError);
    CHECK(rig.mock->total_requests() == 0);
  }

  TEST_CASE("regrade toggle decides whether a broken rewrite is caught") {
    auto make_concise = [](gateway::Gateway& gw, const PipelineConfig& cfg) {
      return pipeline::generate_concise(gw, kWordProblem, cfg);
    };
    const std::vector<gateway::MockScriptEntry> script = {
        entry("generate", "w1", sample::kConciseSolution),
        entry("refine", "w1", "Therefore the value is \\(\\boxed{777}\\).")};

    SUBCASE("regrade on flags the changed answer") {
      Rig rig({kWordProblem}, script);
      auto cfg = toy_config();
      auto patient = pipeline::refine_to_patient(rig.gw, kWordProblem, make_concise(rig.gw, cfg), cfg);
      CHECK(patient.verdict == Verdict::Incorrect);
      REQUIRE(patient.extracted_answer.has_value());
      CHECK(*patient.extracted_answer == "777");
    }
    SUBCASE("regrade off copies the concise verdict through") {
      Rig rig({kWordProblem}, script);
      auto cfg = toy_config();
      cfg.regrade_refined = false;
      auto patient = pipeline::refine_to_patient(rig.gw, kWordProblem, make_concise(rig.gw, cfg), cfg);
      CHECK(patient.verdict == Verdict::Correct);
      REQUIRE(patient.extracted_answer.has_value());
      CHECK(*patient.extracted_answer == "8");
    }
  }

  TEST_CASE("build_pair assembles prompt, chosen, rejected and provenance meta") {
    auto cfg = toy_config();
    CandidateSolution concise{"w1", "short proof. The answer is: 8", SolutionStyle::Concise,
                              "8", Verdict::Correct, cfg.gen_params, 0.0};
    CandidateSolution patient{"w1", "long proof. \\(\\boxed{8}\\)", SolutionStyle::Patient,
                              "8", Verdict::Correct, cfg.refine_params, 0.0};

    std::string reason;
    auto pair = pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason);
    REQUIRE(pair.has_value());
    CHECK(pair->problem_id == "w1");
    CHECK(pair->prompt == prompts::render_generation_prompt(kWordProblem.problem));
    CHECK(pair->chosen == patient.text);
    CHECK(pair->rejected == concise.text);
    CHECK(pair->meta.at("generator_model") == "gen-model");
    CHECK(pair->meta.at("refiner_model") == "refine-model");
    CHECK(pair->meta.at("grader_version") == std::string(grader::version()));
    const std::string created = pair->meta.at("created_at").get<std::string>();
    CHECK(std::regex_match(created,
                           std::regex(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)")));
  }

  TEST_CASE("build_pair drop reasons") {
    auto cfg = toy_config();
    CandidateSolution concise{"w1", "short. The answer is: 8", SolutionStyle::Concise,
                              "8", Verdict::Correct, cfg.gen_params, 0.0};
    CandidateSolution patient{"w1", "long. \\(\\boxed{8}\\)", SolutionStyle::Patient,
                              "8", Verdict::Correct, cfg.refine_params, 0.0};
    std::string reason;

    SUBCASE("incorrect concise") {
      concise.verdict = Verdict::Incorrect;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
      CHECK(reason == "concise_incorrect");
    }
    SUBCASE("unextractable concise") {
      concise.verdict = Verdict::Unextractable;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
      CHECK(reason == "concise_unextractable");
    }
    SUBCASE("incorrect refinement") {
      patient.verdict = Verdict::Incorrect;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
      CHECK(reason == "refined_incorrect");
    }
    SUBCASE("unextractable refinement") {
      patient.verdict = Verdict::Unextractable;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
      CHECK(reason == "refined_unextractable");
    }
    SUBCASE("byte-identical texts") {
      patient.text = concise.text;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
      CHECK(reason == "degenerate_pair");
    }
    SUBCASE("regrade off keeps a refinement the grader would reject") {
      cfg.regrade_refined = false;
      patient.verdict = Verdict::Incorrect;
      CHECK(pipeline::build_pair(kWordProblem, concise, patient, cfg, &reason).has_value());
    }
    SUBCASE("the reason pointer is optional") {
      concise.verdict = Verdict::Incorrect;
      CHECK_FALSE(pipeline::build_pair(kWordProblem, concise, patient, cfg).has_value());
    }
  }

  TEST_CASE("golden twenty problem run") {
    const auto problems = golden_problems();
    Rig rig(problems, golden_script(problems));
    auto cfg = toy_config();

    auto result = pipeline::run_pipeline(rig.gw, problems, cfg);
    CHECK(result.stats == golden_stats());
    check_chain(result.stats);

    REQUIRE(result.pairs.size() == 10);
    for (std::size_t i = 0; i < result.pairs.size(); ++i) {
      CAPTURE(i);
      const auto& pair = result.pairs[i];
      const auto& problem = problems[i];
      CHECK(pair.problem_id == problem.id);
      CHECK(pair.prompt == prompts::render_generation_prompt(problem.problem));
      CHECK(pair.chosen == patient_reply(problem.gold_answer));
      CHECK(pair.rejected == concise_reply(problem.gold_answer));
      // Post hoc re-check of the filter promise: the rejected side still
      // grades correct against gold under exact equivalence.
      CHECK(grader::grade_solution(pair.rejected, problem.gold_answer, cfg.equivalence) ==
            Verdict::Correct);
      CHECK(grader::grade_solution(pair.chosen, problem.gold_answer, cfg.equivalence) ==
            Verdict::Correct);
    }
  }

  TEST_CASE("empty problem list yields an empty result") {
    const auto problems = golden_problems();
    Rig rig(problems, golden_script(problems));
    auto result = pipeline::run_pipeline(rig.gw, {}, toy_config());
    CHECK(result.pairs.empty());
    CHECK(result.stats == PipelineStats{});
    CHECK(rig.mock->total_requests() == 0);
  }

  TEST_CASE("generation retries inflate n_generated past n_problems") {
    std::vector<ProblemRecord> problems = {{"q1", "Problem one?", "4", ""},
                                           {"q2", "Problem two?", "5", ""}};
    Rig rig(problems, {entry("generate", "q1", "The answer is: 0"),
                       entry("generate", "q2", "The answer is: 0")});
    auto cfg = toy_config();
    cfg.max_gen_attempts_per_problem = 3;

    auto result = pipeline::run_pipeline(rig.gw, problems, cfg);
    CHECK(result.stats.n_problems == 2);
    CHECK(result.stats.n_generated == 6);
    CHECK(result.stats.n_correct_concise == 0);
    CHECK(result.stats.drop_reasons.at("concise_incorrect") == 2);
    check_chain(result.stats, /*retries_enabled=*/true);
  }

  TEST_CASE("checkpoint records pairs and processed ids in input order") {
    const auto problems = golden_problems();
    Rig rig(problems, golden_script(problems));
    TempDir tmp;
    auto cfg = toy_config();
    cfg.checkpoint_path = tmp.file("pairs.jsonl");

    auto result = pipeline::run_pipeline(rig.gw, problems, cfg);
    REQUIRE(result.pairs.size() == 10);

    auto on_disk = corpus::load_pairs(*cfg.checkpoint_path);
    CHECK(on_disk == result.pairs);

    const auto sidecar = pipeline::sidecar_path(*cfg.checkpoint_path);
    CHECK(sidecar.parent_path() == cfg.checkpoint_path->parent_path());
    auto ids = read_lines(sidecar);
    REQUIRE(ids.size() == problems.size());
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == problems[i].id);
  }

  TEST_CASE("kill and resume reproduces the uninterrupted run") {
    const auto problems = golden_problems();
    const auto script = golden_script(problems);
    TempDir tmp;

    Rig ref_rig(problems, script);
    auto reference = pipeline::run_pipeline(ref_rig.gw, problems, toy_config());

    // Interrupted run: only the first 12 problems got through.
    auto cfg = toy_config();
    cfg.checkpoint_path = tmp.file("pairs.jsonl");
    Rig rig1(problems, script);
    std::vector<ProblemRecord> first12(problems.begin(), problems.begin() + 12);
    auto partial = pipeline::run_pipeline(rig1.gw, first12, cfg);
    CHECK(partial.stats.n_problems == 12);
    CHECK(partial.pairs.size() == 10);

    // Resume over the full list; only the remaining 8 are attempted.
    cfg.resume = true;
    Rig rig2(problems, script);
    auto resumed = pipeline::run_pipeline(rig2.gw, problems, cfg);
    CHECK(rig2.mock->total_requests() == 8);
    CHECK(resumed.stats.n_problems == 8);
    CHECK(resumed.stats.n_generated == 8);
    CHECK(resumed.stats.n_correct_concise == 0);
    CHECK(resumed.stats.n_pairs_emitted == 0);
    CHECK(resumed.stats.drop_reasons.at("concise_incorrect") == 5);
    CHECK(resumed.stats.drop_reasons.at("concise_unextractable") == 3);
    check_chain(resumed.stats);

    check_same_semantic_fields(resumed.pairs, reference.pairs);
    check_same_semantic_fields(corpus::load_pairs(*cfg.checkpoint_path), reference.pairs);

    // Nothing left: a further resumed run issues no requests and adds nothing.
    Rig rig3(problems, script);
    auto idle = pipeline::run_pipeline(rig3.gw, problems, cfg);
    CHECK(rig3.mock->total_requests() == 0);
    CHECK(idle.stats == PipelineStats{});
    CHECK(idle.pairs.size() == 10);
    check_same_semantic_fields(idle.pairs, reference.pairs);
  }

  TEST_CASE("restart without resume truncates the checkpoint") {
    const auto problems = golden_problems();
    const auto script = golden_script(problems);
    TempDir tmp;
    auto cfg = toy_config();
    cfg.checkpoint_path = tmp.file("pairs.jsonl");

    Rig rig1(problems, script);
    std::vector<ProblemRecord> first12(problems.begin(), problems.begin() + 12);
    pipeline::run_pipeline(rig1.gw, first12, cfg);

    Rig rig2(problems, script);
    auto full = pipeline::run_pipeline(rig2.gw, problems, cfg);
    CHECK(full.stats.n_problems == 20);
    CHECK(full.pairs.size() == 10);
    CHECK(corpus::load_pairs(*cfg.checkpoint_path).size() == 10);
    CHECK(read_lines(pipeline::sidecar_path(*cfg.checkpoint_path)).size() == 20);
  }

  TEST_CASE("unwritable checkpoint path aborts the run") {
    const auto problems = golden_problems();
    Rig rig(problems, golden_script(problems));
    TempDir tmp;
    auto cfg = toy_config();
    cfg.checkpoint_path = tmp.path / "no_such_dir" / "pairs.jsonl";
    CHECK_THROWS_AS(pipeline::run_pipeline(rig.gw, problems, cfg), IoError);
  }

  TEST_CASE("gateway failures drop the problem and the batch continues") {
    std::vector<ProblemRecord> problems = {{"a", "Question a?", "1", ""},
                                           {"b", "Question b?", "2", ""},
                                           {"c", "Question c?", "3", ""},
                                           {"d", "Question d?", "4", ""}};
    auto down = entry("generate", "b", "The answer is: 2");
    down.fail_times = 10;
    down.fail_code = 503;
    // d's generation succeeds but no refine response is scripted, so the
    // refine call 404s and surfaces as a gateway error too.
    std::vector<gateway::MockScriptEntry> script = {
        entry("generate", "a", "The answer is: 1"),
        entry("refine", "a", "So we have \\(\\boxed{1}\\)."),
        down,
        entry("generate", "c", "The answer is: 3"),
        entry("refine", "c", "So we have \\(\\boxed{3}\\)."),
        entry("generate", "d", "The answer is: 4")};

    Rig rig(problems, script);
    auto result = pipeline::run_pipeline(rig.gw, problems, toy_config());
    REQUIRE(result.pairs.size() == 2);
    CHECK(result.pairs[0].problem_id == "a");
    CHECK(result.pairs[1].problem_id == "c");
    CHECK(result.stats.n_problems == 4);
    CHECK(result.stats.n_correct_concise == 3);
    CHECK(result.stats.n_refined == 2);
    CHECK(result.stats.drop_reasons.at("gateway_error") == 2);
    check_chain(result.stats);
  }

  TEST_CASE("a non-gateway failure in a worker aborts the run") {
    std::vector<ProblemRecord> problems = {{"x", "Question x?", "1", ""},
                                           {"y", "Question y?", "", ""},
                                           {"z", "Question z?", "3", ""}};
    std::vector<gateway::MockScriptEntry> script = {
        entry("generate", "x", "The answer is: 1"),
        entry("refine", "x", "So we have \\(\\boxed{1}\\)."),
        entry("generate", "y", "The answer is: 2"),
        entry("generate", "z", "The answer is: 3"),
        entry("refine", "z", "So we have \\(\\boxed{3}\\).")};
    TempDir tmp;
    auto cfg = toy_config();
    cfg.checkpoint_path = tmp.file("pairs.jsonl");

    Rig rig(problems, script, quiet_config(3));
    CHECK_THROWS_AS(pipeline::run_pipeline(rig.gw, problems, cfg), grader::EmptyGoldError);

    // The commit log stops at the failing problem.
    auto ids = read_lines(pipeline::sidecar_path(*cfg.checkpoint_path));
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == "x");
  }

  TEST_CASE("output is deterministic under randomized provider latencies") {
    const auto problems = golden_problems();
    const auto script = golden_script(problems);

    Rig rig1(problems, script, quiet_config(8));
    rig1.mock->set_random_delay(3, 101);
    auto run1 = pipeline::run_pipeline(rig1.gw, problems, toy_config());

    Rig rig2(problems, script, quiet_config(8));
    rig2.mock->set_random_delay(3, 202);
    auto run2 = pipeline::run_pipeline(rig2.gw, problems, toy_config());

    CHECK(run1.stats == run2.stats);
    check_same_semantic_fields(run1.pairs, run2.pairs);
  }

  TEST_CASE("worked example flows through the whole pipeline") {
    Rig rig({kWordProblem}, {entry("generate", "w1", sample::kConciseSolution),
                             entry("refine", "w1", sample::kPatientSolution)});
    auto result = pipeline::run_pipeline(rig.gw, {kWordProblem}, toy_config());
    REQUIRE(result.pairs.size() == 1);
    CHECK(result.pairs[0].chosen == sample::kPatientSolution);
    CHECK(result.pairs[0].rejected == sample::kConciseSolution);
    CHECK(result.stats.n_pairs_emitted == 1);
    check_chain(result.stats);
  }
}
