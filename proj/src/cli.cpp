#include "patience/cli.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patience/app_config.hpp"
#include "patience/corpus.hpp"
#include "patience/dpo.hpp"
#include "patience/evaluator.hpp"
#include "patience/llm_gateway.hpp"
#include "patience/mock_provider.hpp"
#include "patience/pair_factory.hpp"
#include "patience/prompts.hpp"

namespace patience::cli {
namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config;
  std::string problems;
  std::string out;
  std::string mock_script;
  std::int64_t seed = 0;
  int max_in_flight = 0;
  bool resume = false;
};

struct TrainOpts {
  std::string config;
  std::string pairs;
  std::string out;
  std::int64_t seed = 0;
  double beta = 0.0;
  double lr = 0.0;
  int steps = 0;
};

struct ReportOpts {
  std::string baseline;
  std::string candidate;
  std::string out;
};

struct GatewayBundle {
  std::unique_ptr<gateway::Gateway> gw;
  std::shared_ptr<gateway::MockProvider> mock;
};

AppConfig resolve_config(const std::string& config_path) {
  return config_path.empty() ? default_config() : load_config(config_path);
}

GatewayBundle make_gateway(const AppConfig& cfg, const std::string& mock_script,
                           const std::vector<ProblemRecord>& problems) {
  GatewayBundle bundle;
  if (!mock_script.empty()) {
    bundle.mock =
        std::make_shared<gateway::MockProvider>(problems, gateway::load_mock_script(mock_script));
    bundle.gw = std::make_unique<gateway::Gateway>(bundle.mock, cfg.gateway);
    return bundle;
  }
  if (cfg.gateway.base_url.empty())
    throw ConfigError(
        "no endpoint configured: set gateway.base_url, LLM_BASE_URL, or pass --mock-script");
  bundle.gw = std::make_unique<gateway::Gateway>(gateway::make_http_provider(cfg.gateway),
                                                 cfg.gateway);
  return bundle;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_generate(const CommonOpts& o, std::ostream& out, std::ostream& err) {
  AppConfig cfg = resolve_config(o.config);
  if (o.max_in_flight > 0) cfg.gateway.max_in_flight = o.max_in_flight;
  if (o.seed != 0) cfg.generation.seed = o.seed;

  const auto problems = corpus::load_problems(o.problems);
  auto bundle = make_gateway(cfg, o.mock_script, problems);

  pipeline::PipelineConfig pc;
  pc.gen_params = cfg.generation;
  pc.max_gen_attempts_per_problem = cfg.max_gen_attempts_per_problem;

  std::vector<std::optional<CandidateSolution>> slots(problems.size());
  std::vector<std::string> failures(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= problems.size()) return;
      try {
        slots[i] = pipeline::generate_concise(*bundle.gw, problems[i], pc);
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(std::max(1, cfg.gateway.max_in_flight), std::max<std::size_t>(problems.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& th : threads) th.join();

  std::vector<CandidateSolution> solutions;
  solutions.reserve(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (slots[i]) {
      solutions.push_back(std::move(*slots[i]));
    } else {
      err << "warning: " << problems[i].id << ": " << failures[i] << '\n';
    }
  }
  const std::size_t written = corpus::write_jsonl(fs::path(o.out), solutions);
  out << "wrote " << written << " solutions to " << o.out << '\n';
  return 0;
}

int cmd_pairs(const CommonOpts& o, std::ostream& out, std::ostream&) {
  AppConfig cfg = resolve_config(o.config);
  if (o.max_in_flight > 0) cfg.gateway.max_in_flight = o.max_in_flight;
  if (o.seed != 0) {
    cfg.generation.seed = o.seed;
    cfg.refinement.seed = o.seed;
  }

  const auto problems = corpus::load_problems(o.problems);
  auto bundle = make_gateway(cfg, o.mock_script, problems);

  pipeline::PipelineConfig pc;
  pc.gen_params = cfg.generation;
  pc.refine_params = cfg.refinement;
  pc.max_gen_attempts_per_problem = cfg.max_gen_attempts_per_problem;
  pc.regrade_refined = cfg.regrade_refined;
  pc.checkpoint_path = fs::path(o.out);
  pc.resume = o.resume;

  const auto result = pipeline::run_pipeline(*bundle.gw, problems, pc);
  const fs::path stats_path = fs::path(o.out).parent_path() / "stats.json";
  corpus::write_stats(stats_path, result.stats);

  out << "problems attempted: " << result.stats.n_problems << '\n'
      << "pairs in " << o.out << ": " << result.pairs.size() << " ("
      << result.stats.n_pairs_emitted << " new)\n";
  for (const auto& [reason, count] : result.stats.drop_reasons)
    out << "dropped " << reason << ": " << count << '\n';
  return 0;
}

int cmd_train_toy(const TrainOpts& o, const CLI::App* cmd, std::ostream& out, std::ostream&) {
  AppConfig cfg = resolve_config(o.config);
  if (cmd->count("--beta") != 0) cfg.dpo.beta = o.beta;
  if (cmd->count("--lr") != 0) cfg.dpo.lr = o.lr;
  if (cmd->count("--steps") != 0) cfg.dpo.steps = o.steps;
  if (cmd->count("--seed") != 0) {
    cfg.dpo.seed = static_cast<std::uint64_t>(o.seed);
    cfg.dpo.init = dpo::ThetaInit::SeededUniform;
  }

  const auto pairs = corpus::load_pairs(o.pairs);
  auto [vocab, batch] = dpo::tokenize_pairs(pairs, dpo::TokenScheme::Whitespace);
  const auto result = dpo::train(batch, vocab.size(), cfg.dpo);

  const fs::path dir(o.out);
  fs::create_directories(dir);

  std::ofstream history(dir / "history.csv", std::ios::trunc);
  if (!history) throw IoError("cannot open " + (dir / "history.csv").string() + " for writing");
  history << "step,loss,pref_acc\n";
  for (const auto& step : result.history)
    history << step.step << ',' << format_g(step.loss) << ',' << format_g(step.pref_acc) << '\n';
  history.flush();
  if (!history) throw IoError("write to " + (dir / "history.csv").string() + " failed");

  nlohmann::json policy{{"vocab", vocab.tokens()}, {"theta", result.policy.theta}};
  std::ofstream policy_file(dir / "policy.json", std::ios::trunc);
  if (!policy_file) throw IoError("cannot open " + (dir / "policy.json").string() + " for writing");
  policy_file << policy.dump(2) << '\n';
  policy_file.flush();
  if (!policy_file) throw IoError("write to " + (dir / "policy.json").string() + " failed");

  const auto& final_step = result.history.back();
  out << "trained " << batch.size() << " pairs, vocab " << vocab.size() << ", " << cfg.dpo.steps
      << " steps\n"
      << "final loss " << format_g(final_step.loss) << ", preference accuracy "
      << format_g(final_step.pref_acc) << '\n';
  return 0;
}

int cmd_eval(const CommonOpts& o, std::ostream& out, std::ostream&) {
  AppConfig cfg = resolve_config(o.config);
  if (o.max_in_flight > 0) cfg.gateway.max_in_flight = o.max_in_flight;
  if (o.seed != 0) cfg.evaluation.seed = o.seed;

  const auto problems = corpus::load_problems(o.problems);
  auto bundle = make_gateway(cfg, o.mock_script, problems);

  const std::string corpus_name = fs::path(o.problems).stem().string();
  const auto report =
      eval::evaluate(problems, *bundle.gw, cfg.evaluation, cfg.eval_equivalence, corpus_name);

  std::ofstream file(o.out, std::ios::trunc);
  if (!file) throw IoError("cannot open " + o.out + " for writing");
  file << eval::report_to_json(report).dump(2) << '\n';
  file.flush();
  if (!file) throw IoError("write to " + o.out + " failed");

  char acc[64];
  std::snprintf(acc, sizeof acc, "%.1f", report.accuracy * 100.0);
  out << "evaluated " << report.n << " problems: " << report.n_correct << " correct (" << acc
      << "%)\n"
      << "report written to " << o.out << '\n';
  return 0;
}

nlohmann::json parse_json_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

int cmd_report(const ReportOpts& o, std::ostream& out, std::ostream&) {
  const auto baseline = eval::report_from_json(parse_json_file(o.baseline));
  const auto candidate = eval::report_from_json(parse_json_file(o.candidate));
  const auto comparison = eval::compare_reports(baseline, candidate);
  out << eval::render_comparison(comparison);
  if (!o.out.empty()) {
    std::ofstream file(o.out, std::ios::trunc);
    if (!file) throw IoError("cannot open " + o.out + " for writing");
    file << eval::comparison_to_json(comparison).dump(2) << '\n';
    file.flush();
    if (!file) throw IoError("write to " + o.out + " failed");
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Builds patient-reasoning preference data and trains/evaluates against it"};
  app.require_subcommand(1);

  CommonOpts gen_opts, pairs_opts, eval_opts;
  TrainOpts train_opts;
  ReportOpts report_opts;

  CLI::App* generate = app.add_subcommand(
      "generate", "Produce step-by-step solutions for every problem and grade them");
  generate->add_option("--config", gen_opts.config, "JSON config file");
  generate->add_option("--problems", gen_opts.problems, "problems.jsonl input")->required();
  generate->add_option("--out", gen_opts.out, "solutions.jsonl output")->required();
  generate->add_option("--mock-script", gen_opts.mock_script, "scripted offline provider");
  generate->add_option("--seed", gen_opts.seed, "sampling seed sent with each request");
  generate->add_option("--max-in-flight", gen_opts.max_in_flight, "concurrent request cap");

  CLI::App* pairs = app.add_subcommand(
      "pairs", "Run the full generate-filter-refine pipeline and emit preference pairs");
  pairs->add_option("--config", pairs_opts.config, "JSON config file");
  pairs->add_option("--problems", pairs_opts.problems, "problems.jsonl input")->required();
  pairs->add_option("--out", pairs_opts.out, "pairs.jsonl output (also the checkpoint)")
      ->required();
  pairs->add_option("--mock-script", pairs_opts.mock_script, "scripted offline provider");
  pairs->add_flag("--resume", pairs_opts.resume, "skip problems already in the checkpoint");
  pairs->add_option("--seed", pairs_opts.seed, "sampling seed sent with each request");
  pairs->add_option("--max-in-flight", pairs_opts.max_in_flight, "concurrent request cap");

  CLI::App* train = app.add_subcommand(
      "train-toy", "Fit the toy categorical policy on preference pairs with DPO");
  train->add_option("--config", train_opts.config, "JSON config file");
  train->add_option("--pairs", train_opts.pairs, "pairs.jsonl input")->required();
  train->add_option("--out", train_opts.out, "output directory for history.csv and policy.json")
      ->required();
  train->add_option("--seed", train_opts.seed, "switch to seeded uniform(-0.1, 0.1) init");
  train->add_option("--beta", train_opts.beta, "preference temperature");
  train->add_option("--lr", train_opts.lr, "learning rate");
  train->add_option("--steps", train_opts.steps, "gradient steps");

  CLI::App* evaluate = app.add_subcommand(
      "eval", "Score an endpoint on a problem corpus with the boxed-answer protocol");
  evaluate->add_option("--config", eval_opts.config, "JSON config file");
  evaluate->add_option("--problems", eval_opts.problems, "problems.jsonl input")->required();
  evaluate->add_option("--out", eval_opts.out, "report.json output")->required();
  evaluate->add_option("--mock-script", eval_opts.mock_script, "scripted offline provider");
  evaluate->add_option("--seed", eval_opts.seed, "sampling seed sent with each request");
  evaluate->add_option("--max-in-flight", eval_opts.max_in_flight, "concurrent request cap");

  CLI::App* report = app.add_subcommand(
      "report", "Render a baseline-vs-candidate accuracy and timing table");
  report->add_option("baseline", report_opts.baseline, "baseline report.json")->required();
  report->add_option("candidate", report_opts.candidate, "candidate report.json")->required();
  report->add_option("--out", report_opts.out, "also write comparison.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_opts, out, err);
    if (pairs->parsed()) return cmd_pairs(pairs_opts, out, err);
    if (train->parsed()) return cmd_train_toy(train_opts, train, out, err);
    if (evaluate->parsed()) return cmd_eval(eval_opts, out, err);
    if (report->parsed()) return cmd_report(report_opts, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << "error: no subcommand selected\n";
  return 2;
}

}  // namespace patience::cli
