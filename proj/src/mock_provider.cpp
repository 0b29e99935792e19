#include "patience/mock_provider.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>
#include <utility>

#include "patience/prompts.hpp"

namespace patience::gateway {
namespace {

using nlohmann::json;

struct Frame {
  std::string prefix;
  std::string mid;  // empty for single-placeholder templates
  std::string suffix;
};

Frame split_template(std::string_view text) {
  Frame f;
  const auto p = text.find("{problem}");
  const auto s = text.find("{solution}");
  f.prefix = std::string(text.substr(0, p));
  if (s == std::string_view::npos) {
    f.suffix = std::string(text.substr(p + 9));
  } else {
    f.mid = std::string(text.substr(p + 9, s - (p + 9)));
    f.suffix = std::string(text.substr(s + 10));
  }
  return f;
}

const Frame& generate_frame() {
  static const Frame f = split_template(prompts::generation_template().text);
  return f;
}

const Frame& refine_frame() {
  static const Frame f = split_template(prompts::refinement_template().text);
  return f;
}

const Frame& eval_frame() {
  static const Frame f = split_template(prompts::eval_template().text);
  return f;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

// Recovers (template name, problem text) by matching the fixed frames.
std::optional<std::pair<std::string, std::string>> classify(const std::string& prompt) {
  const Frame& refine = refine_frame();
  if (starts_with(prompt, refine.prefix) && ends_with(prompt, refine.suffix)) {
    const auto mid = prompt.find(refine.mid, refine.prefix.size());
    if (mid != std::string::npos)
      return {{"refine", prompt.substr(refine.prefix.size(), mid - refine.prefix.size())}};
  }
  const Frame& eval = eval_frame();
  if (ends_with(prompt, eval.suffix) && prompt.size() > eval.suffix.size())
    return {{"eval", prompt.substr(0, prompt.size() - eval.suffix.size())}};
  const Frame& generate = generate_frame();
  if (ends_with(prompt, generate.suffix) && prompt.size() > generate.suffix.size())
    return {{"generate", prompt.substr(0, prompt.size() - generate.suffix.size())}};
  return std::nullopt;
}

json scripted_failure_body(int code) {
  return json{{"error", {{"message", "scripted failure"}, {"code", code}}}};
}

}  // namespace

std::vector<MockScriptEntry> load_mock_script(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<MockScriptEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MalformedLineError(path, line_no, e.what());
    }
    MockScriptEntry entry;
    if (!j.is_object() || !j.contains("match") || !j["match"].is_object() ||
        !j.contains("respond") || !j["respond"].is_string())
      throw MalformedLineError(path, line_no, "expected {\"match\": {...}, \"respond\": str}");
    const json& match = j["match"];
    if (!match.contains("template") || !match["template"].is_string() ||
        !match.contains("problem_id") || !match["problem_id"].is_string())
      throw MalformedLineError(path, line_no, "match needs string \"template\" and \"problem_id\"");
    entry.template_name = match["template"].get<std::string>();
    if (entry.template_name != "generate" && entry.template_name != "refine" &&
        entry.template_name != "eval")
      throw MalformedLineError(path, line_no, "unknown template \"" + entry.template_name + "\"");
    entry.problem_id = match["problem_id"].get<std::string>();
    entry.respond = j["respond"].get<std::string>();
    entry.fail_times = j.value("fail_times", 0);
    entry.fail_code = j.value("fail_code", 500);
    entry.delay_ms = j.value("delay_ms", 0);
    entries.push_back(std::move(entry));
  }
  return entries;
}

MockProvider::MockProvider(std::vector<ProblemRecord> problems,
                           std::vector<MockScriptEntry> script) {
  for (const auto& p : problems) problem_id_by_text_[p.problem] = p.id;
  entries_.reserve(script.size());
  for (auto& entry : script) {
    const auto key = std::make_pair(entry.template_name, entry.problem_id);
    EntryState state{std::move(entry), 0};
    state.failures_left = state.entry.fail_times;
    entry_index_[key] = entries_.size();  // later script lines override earlier ones
    entries_.push_back(std::move(state));
  }
}

void MockProvider::set_random_delay(int max_ms, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  random_delay_max_ms_ = std::max(0, max_ms);
  delay_rng_.seed(seed);
}

int MockProvider::concurrency_high_water() const {
  std::lock_guard lock(mu_);
  return high_water_;
}

int MockProvider::total_requests() const {
  std::lock_guard lock(mu_);
  return total_requests_;
}

MockProvider::EntryState* MockProvider::route(const std::string& prompt, std::string* why) {
  const auto classified = classify(prompt);
  if (!classified) {
    *why = "prompt matches no known template";
    return nullptr;
  }
  const auto id = problem_id_by_text_.find(classified->second);
  if (id == problem_id_by_text_.end()) {
    *why = "prompt's problem text is not in the corpus";
    return nullptr;
  }
  const auto entry = entry_index_.find(std::make_pair(classified->first, id->second));
  if (entry == entry_index_.end()) {
    *why = "no script entry for (" + classified->first + ", " + id->second + ")";
    return nullptr;
  }
  return &entries_[entry->second];
}

ProviderResponse MockProvider::complete_once(const nlohmann::json& request) {
  int extra_delay_ms = 0;
  {
    std::lock_guard lock(mu_);
    ++total_requests_;
    ++in_flight_;
    high_water_ = std::max(high_water_, in_flight_);
    if (random_delay_max_ms_ > 0)
      extra_delay_ms = std::uniform_int_distribution<int>(0, random_delay_max_ms_)(delay_rng_);
  }
  struct InFlightGuard {
    MockProvider* self;
    ~InFlightGuard() {
      std::lock_guard lock(self->mu_);
      --self->in_flight_;
    }
  } guard{this};

  std::string prompt;
  try {
    prompt = request.at("messages").at(0).at("content").get<std::string>();
  } catch (const json::exception&) {
    return {400, json{{"error", {{"message", "malformed request"}}}}.dump()};
  }

  std::string why;
  EntryState* state = route(prompt, &why);
  if (state == nullptr) return {404, json{{"error", {{"message", why}}}}.dump()};

  bool fail = false;
  int fail_code = 0;
  {
    std::lock_guard lock(mu_);
    if (state->failures_left > 0) {
      --state->failures_left;
      fail = true;
      fail_code = state->entry.fail_code;
    }
  }

  const int delay_ms = state->entry.delay_ms + extra_delay_ms;
  if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));

  if (fail) {
    if (fail_code == 0) throw TransportError("scripted transport failure");
    return {fail_code, scripted_failure_body(fail_code).dump()};
  }

  const json body{
      {"object", "chat.completion"},
      {"model", request.value("model", "mock")},
      {"choices", json::array({json{{"index", 0},
                                    {"message", {{"role", "assistant"},
                                                 {"content", state->entry.respond}}},
                                    {"finish_reason", "stop"}}})},
      {"usage", {{"prompt_tokens", static_cast<std::int64_t>(prompt.size() / 4)},
                 {"completion_tokens", static_cast<std::int64_t>(state->entry.respond.size() / 4)}}}};
  return {200, body.dump()};
}

}  // namespace patience::gateway
