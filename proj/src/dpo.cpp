#include "patience/dpo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

namespace patience::dpo {
namespace {

double logsumexp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (const double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double seq_lp(const std::vector<double>& theta, double lse, const std::vector<int>& ids) {
  double sum = 0.0;
  for (const int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= theta.size())
      throw UnknownTokenError("id " + std::to_string(id));
    sum += theta[id] - lse;
  }
  return sum;
}

void check_batch(const DpoBatch& batch) {
  if (batch.size() == 0) throw EmptyBatchError();
  if (batch.rejected.size() != batch.chosen.size())
    throw Error("batch chosen/rejected lists differ in length");
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch.chosen[i].empty() || batch.rejected[i].empty())
      throw Error("empty sequence in batch item " + std::to_string(i));
}

// z_i = beta * ((logpi(yw) - logref(yw)) - (logpi(yl) - logref(yl)))
std::vector<double> margins(const ToyPolicy& policy, const ToyPolicy& reference,
                            const DpoBatch& batch, double beta) {
  check_batch(batch);
  const double lse_p = logsumexp(policy.theta);
  const double lse_r = logsumexp(reference.theta);
  std::vector<double> z(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double dw = seq_lp(policy.theta, lse_p, batch.chosen[i]) -
                      seq_lp(reference.theta, lse_r, batch.chosen[i]);
    const double dl = seq_lp(policy.theta, lse_p, batch.rejected[i]) -
                      seq_lp(reference.theta, lse_r, batch.rejected[i]);
    z[i] = beta * (dw - dl);
  }
  return z;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) {
  for (auto& t : tokens) {
    if (ids_.count(t) != 0) throw Error("duplicate token: " + t);
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

int Vocab::add(const std::string& token) {
  const auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end()) throw UnknownTokenError(token);
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw UnknownTokenError("id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const { return ids_.count(token) != 0; }

ToyPolicy ToyPolicy::zeros(std::size_t vocab_size) {
  return ToyPolicy{std::vector<double>(vocab_size, 0.0)};
}

std::vector<double> ToyPolicy::log_probs() const {
  if (theta.empty()) throw Error("policy has an empty vocabulary");
  const double lse = logsumexp(theta);
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) out[k] = theta[k] - lse;
  return out;
}

double ToyPolicy::seq_logprob(const std::vector<int>& token_ids) const {
  if (theta.empty()) throw Error("policy has an empty vocabulary");
  if (token_ids.empty()) throw Error("empty token sequence");
  return seq_lp(theta, logsumexp(theta), token_ids);
}

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference, const DpoBatch& batch,
                double beta) {
  const auto z = margins(policy, reference, batch, beta);
  double total = 0.0;
  for (const double zi : z) total += softplus(-zi);
  return total / static_cast<double>(z.size());
}

std::vector<double> dpo_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                             const DpoBatch& batch, double beta) {
  const auto z = margins(policy, reference, batch, beta);
  const std::size_t v = policy.theta.size();
  const double n = static_cast<double>(batch.size());
  const double lse_p = logsumexp(policy.theta);

  std::vector<double> grad(v, 0.0);
  // Accumulated coefficient of the shared softmax term: each item contributes
  // c_i * (len_w - len_l) * softmax(theta) to the gradient. Keeping it scalar
  // (and skipping zero count diffs below) preserves exact zeros when chosen
  // and rejected coincide.
  double softmax_scale = 0.0;
  std::map<int, long long> count_diff;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double c = -beta * sigmoid(-z[i]) / n;
    count_diff.clear();
    for (const int id : batch.chosen[i]) ++count_diff[id];
    for (const int id : batch.rejected[i]) --count_diff[id];
    for (const auto& [id, d] : count_diff) {
      if (d != 0) grad[static_cast<std::size_t>(id)] += c * static_cast<double>(d);
    }
    const auto dlen = static_cast<double>(batch.chosen[i].size()) -
                      static_cast<double>(batch.rejected[i].size());
    softmax_scale += c * dlen;
  }
  if (softmax_scale != 0.0) {
    for (std::size_t k = 0; k < v; ++k)
      grad[k] -= softmax_scale * std::exp(policy.theta[k] - lse_p);
  }
  return grad;
}

double central_difference(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> theta, std::size_t index, double h) {
  const double x = theta[index];
  theta[index] = x + h;
  const double fp = f(theta);
  theta[index] = x - h;
  const double fm = f(theta);
  return (fp - fm) / (2.0 * h);
}

std::vector<double> fd_grad(const ToyPolicy& policy, const ToyPolicy& reference,
                            const DpoBatch& batch, double beta, double h) {
  std::vector<double> grad(policy.theta.size());
  const auto loss_at = [&](const std::vector<double>& theta) {
    return dpo_loss(ToyPolicy{theta}, reference, batch, beta);
  };
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad[i] = central_difference(loss_at, policy.theta, i, h);
  return grad;
}

double preference_accuracy(const ToyPolicy& policy, const ToyPolicy& reference,
                           const DpoBatch& batch, double beta) {
  const auto z = margins(policy, reference, batch, beta);
  const auto positive = std::count_if(z.begin(), z.end(), [](double zi) { return zi > 0.0; });
  return static_cast<double>(positive) / static_cast<double>(z.size());
}

double implicit_reward(const ToyPolicy& policy, const ToyPolicy& reference,
                       const std::vector<int>& token_ids, double beta) {
  return beta * (policy.seq_logprob(token_ids) - reference.seq_logprob(token_ids));
}

TrainResult train(const DpoBatch& batch, std::size_t vocab_size, const DpoConfig& cfg) {
  if (cfg.beta <= 0.0) throw Error("beta must be positive");
  if (cfg.lr <= 0.0) throw Error("lr must be positive");
  if (cfg.steps < 0) throw Error("steps must be non-negative");
  if (vocab_size == 0) throw Error("vocab is empty");
  check_batch(batch);

  ToyPolicy policy = ToyPolicy::zeros(vocab_size);
  if (cfg.init == ThetaInit::SeededUniform) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (auto& t : policy.theta) t = dist(rng);
  }
  const ToyPolicy reference = policy;

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  for (int step = 0; step <= cfg.steps; ++step) {
    const double loss = dpo_loss(policy, reference, batch, cfg.beta);
    if (!std::isfinite(loss)) throw NonFiniteLossError(step);
    result.history.push_back(
        {step, loss, preference_accuracy(policy, reference, batch, cfg.beta)});
    if (step == cfg.steps) break;
    const auto grad = dpo_grad(policy, reference, batch, cfg.beta);
    for (std::size_t k = 0; k < vocab_size; ++k) policy.theta[k] -= cfg.lr * grad[k];
  }
  result.policy = std::move(policy);
  return result;
}

std::pair<Vocab, DpoBatch> tokenize_pairs(const std::vector<PreferencePair>& pairs,
                                          TokenScheme scheme) {
  Vocab vocab;
  DpoBatch batch;
  const auto encode = [&](const std::string& text) {
    std::vector<int> ids;
    if (scheme == TokenScheme::Whitespace) {
      std::istringstream in(text);
      std::string token;
      while (in >> token) ids.push_back(vocab.add(token));
    } else {
      for (const char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) continue;
        ids.push_back(vocab.add(std::string(1, c)));
      }
    }
    return ids;
  };
  for (const auto& pair : pairs) {
    batch.prompt.push_back(encode(pair.prompt));
    batch.chosen.push_back(encode(pair.chosen));
    batch.rejected.push_back(encode(pair.rejected));
  }
  return {std::move(vocab), std::move(batch)};
}

}  // namespace patience::dpo
