#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "patience/corpus.hpp"
#include "patience/errors.hpp"

namespace patience::dpo {

class UnknownTokenError : public Error {
 public:
  explicit UnknownTokenError(const std::string& token)
      : Error("unknown token: " + token) {}
};

class EmptyBatchError : public Error {
 public:
  EmptyBatchError() : Error("batch is empty") {}
};

class NonFiniteLossError : public Error {
 public:
  explicit NonFiniteLossError(int at_step)
      : Error("loss became non-finite at step " + std::to_string(at_step)), step(at_step) {}
  int step;
};

// Fixed token inventory. Ids are dense 0..size()-1 in first-occurrence order.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  int add(const std::string& token);       // idempotent, returns the id
  int id(const std::string& token) const;  // throws UnknownTokenError
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

// Categorical completion policy: one logit per token, position-independent.
// p(token k) = softmax(theta)_k, so a sequence's log-probability is
// sum_t (theta[y_t] - logsumexp(theta)). Prompts do not condition it.
struct ToyPolicy {
  std::vector<double> theta;

  static ToyPolicy zeros(std::size_t vocab_size);

  std::vector<double> log_probs() const;  // log softmax(theta)
  double seq_logprob(const std::vector<int>& token_ids) const;
};

struct DpoBatch {
  // Parallel arrays, one entry per pair. Prompts ride along for provenance
  // but never enter the objective.
  std::vector<std::vector<int>> prompt;
  std::vector<std::vector<int>> chosen;
  std::vector<std::vector<int>> rejected;

  std::size_t size() const { return chosen.size(); }
};

enum class ThetaInit { Zeros, SeededUniform };  // uniform is (-0.1, 0.1)

struct DpoConfig {
  double beta = 0.1;
  double lr = 1e-2;
  int steps = 100;
  std::uint64_t seed = 0;  // consumed only by SeededUniform init
  ThetaInit init = ThetaInit::Zeros;
};

struct TrainStep {
  int step;
  double loss;      // loss at this step, before the update
  double pref_acc;  // fraction of pairs with strictly positive margin
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<TrainStep> history;  // steps+1 entries; the last one reports
                                   // the post-training loss at step == steps
};

// Preference margin of one pair:
//   z = beta * ((logpi(yw) - logref(yw)) - (logpi(yl) - logref(yl)))
// Loss is mean over pairs of -log sigmoid(z), computed as softplus(-z).
double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference,
                const DpoBatch& batch, double beta);

// Analytic gradient of dpo_loss w.r.t. policy.theta: each pair contributes
// -beta*sigmoid(-z)/n * (grad logpi(yw) - grad logpi(yl)), where
// grad_k logpi(y) = count_k(y) - len(y)*softmax(theta)_k.
std::vector<double> dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                             const DpoBatch& batch, double beta);

// Symmetric difference quotient (f(theta + h e_i) - f(theta - h e_i)) / 2h.
double central_difference(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> theta, std::size_t index, double h);

// Finite-difference gradient of dpo_loss, the checking oracle for dpo_grad.
std::vector<double> fd_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                            const DpoBatch& batch, double beta, double h = 1e-6);

// Fraction of pairs whose margin is strictly greater than zero.
double preference_accuracy(const ToyPolicy& policy, const ToyPolicy& reference,
                           const DpoBatch& batch, double beta);

// Implicit reward r = beta * (logpi(y) - logref(y)); the margin equals
// reward(chosen) - reward(rejected).
double implicit_reward(const ToyPolicy& policy, const ToyPolicy& reference,
                       const std::vector<int>& token_ids, double beta);

// Full-batch gradient descent. The reference policy is frozen at the initial
// theta. Throws NonFiniteLossError as soon as the loss or any parameter
// leaves the finite range.
TrainResult train(const DpoBatch& batch, std::size_t vocab_size, const DpoConfig& cfg);

enum class TokenScheme { Whitespace, Characters };

// Builds a vocab over all pair texts (first occurrence wins, scanning
// prompt, chosen, rejected per pair) and encodes each pair.
std::pair<Vocab, DpoBatch> tokenize_pairs(const std::vector<PreferencePair>& pairs,
                                          TokenScheme scheme = TokenScheme::Whitespace);

}  // namespace patience::dpo
