#include "admix/grpo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

#include "admix/error.hpp"
#include "json.hpp"

namespace admix {

using nlohmann::json;

namespace {

constexpr double kMaxLogRatio = 60.0;

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL + b;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x += c;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double saturated_ratio(double log_ratio) {
  if (log_ratio > kMaxLogRatio) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::fprintf(stderr,
                   "warning: kl ratio saturated at exp(%.0f)\n", kMaxLogRatio);
    }
    log_ratio = kMaxLogRatio;
  }
  return std::exp(log_ratio);
}

}  // namespace

double total_log_prob(const Policy& policy,
                      const std::vector<std::string>& prompt,
                      const std::vector<std::string>& response) {
  double total = 0.0;
  for (double lp : policy.token_log_probs(prompt, response)) total += lp;
  return total;
}

TabularPolicy::TabularPolicy(std::vector<std::string> vocab, int context_order)
    : vocab_(std::move(vocab)), context_order_(context_order) {
  if (context_order_ < 1 || context_order_ > 2) {
    throw Error("invalid_argument", "context_order must be 1 or 2");
  }
  if (vocab_.size() < 2) {
    throw Error("invalid_argument", "vocab too small");
  }
  bos_id_ = eos_id_ = -1;
  std::unordered_map<std::string, int> seen;
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!seen.emplace(vocab_[i], static_cast<int>(i)).second) {
      throw Error("invalid_argument", "duplicate vocab token: " + vocab_[i]);
    }
    if (vocab_[i] == kBosToken) bos_id_ = static_cast<int>(i);
    if (vocab_[i] == kEosToken) eos_id_ = static_cast<int>(i);
  }
  if (bos_id_ < 0 || eos_id_ < 0) {
    throw Error("invalid_argument", "vocab must contain <bos> and <eos>");
  }
  std::size_t contexts = 1;
  for (int k = 0; k < context_order_; ++k) contexts *= vocab_.size();
  logits_.assign(contexts * vocab_.size(), 0.0);
}

int TabularPolicy::token_id(const std::string& token, bool oov_to_bos) const {
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == token) return static_cast<int>(i);
  }
  if (oov_to_bos) return bos_id_;
  throw Error("oov_token", token);
}

std::size_t TabularPolicy::context_index(const std::vector<int>& window) const {
  std::size_t idx = 0;
  for (int id : window) idx = idx * vocab_.size() + static_cast<std::size_t>(id);
  return idx;
}

void TabularPolicy::row_log_probs(std::size_t ctx,
                                  std::vector<double>* out) const {
  const std::size_t v = vocab_.size();
  const double* row = logits_.data() + ctx * v;
  double max_logit = row[0];
  for (std::size_t i = 1; i < v; ++i) max_logit = std::max(max_logit, row[i]);
  double sum = 0.0;
  out->resize(v);
  for (std::size_t i = 0; i < v; ++i) {
    (*out)[i] = row[i] - max_logit;
    sum += std::exp((*out)[i]);
  }
  const double log_sum = std::log(sum);
  for (std::size_t i = 0; i < v; ++i) (*out)[i] -= log_sum;
}

std::size_t TabularPolicy::param_count() const { return logits_.size(); }

std::vector<double> TabularPolicy::params() const { return logits_; }

void TabularPolicy::set_params(const std::vector<double>& params) {
  if (params.size() != logits_.size()) {
    throw Error("invalid_argument", "parameter size mismatch");
  }
  logits_ = params;
}

std::vector<double> TabularPolicy::token_log_probs(
    const std::vector<std::string>& prompt,
    const std::vector<std::string>& response) const {
  std::vector<int> window(context_order_, bos_id_);
  auto push = [&](int id) {
    window.erase(window.begin());
    window.push_back(id);
  };
  for (const auto& tok : prompt) push(token_id(tok, true));
  std::vector<double> row;
  std::vector<double> out;
  out.reserve(response.size());
  for (const auto& tok : response) {
    const int id = token_id(tok, false);
    row_log_probs(context_index(window), &row);
    out.push_back(row[id]);
    push(id);
  }
  return out;
}

std::vector<std::string> TabularPolicy::sample(
    const std::vector<std::string>& prompt, int max_len,
    std::uint64_t seed) const {
  std::vector<int> window(context_order_, bos_id_);
  auto push = [&](int id) {
    window.erase(window.begin());
    window.push_back(id);
  };
  for (const auto& tok : prompt) push(token_id(tok, true));

  std::mt19937_64 rng(seed);
  std::vector<double> row;
  std::vector<std::string> out;
  for (int step = 0; step < max_len; ++step) {
    row_log_probs(context_index(window), &row);
    const double u = unit_double(rng);
    double cum = 0.0;
    int picked = static_cast<int>(vocab_.size()) - 1;
    for (std::size_t i = 0; i < row.size(); ++i) {
      cum += std::exp(row[i]);
      if (u < cum) {
        picked = static_cast<int>(i);
        break;
      }
    }
    out.push_back(vocab_[picked]);
    if (picked == eos_id_) break;
    push(picked);
  }
  return out;
}

std::vector<double> TabularPolicy::grad_log_prob(
    const std::vector<std::string>& prompt,
    const std::vector<std::string>& response) const {
  std::vector<int> window(context_order_, bos_id_);
  auto push = [&](int id) {
    window.erase(window.begin());
    window.push_back(id);
  };
  for (const auto& tok : prompt) push(token_id(tok, true));

  const std::size_t v = vocab_.size();
  std::vector<double> grad(logits_.size(), 0.0);
  std::vector<double> row;
  for (const auto& tok : response) {
    const int id = token_id(tok, false);
    const std::size_t ctx = context_index(window);
    row_log_probs(ctx, &row);
    double* g = grad.data() + ctx * v;
    for (std::size_t i = 0; i < v; ++i) g[i] -= std::exp(row[i]);
    g[id] += 1.0;
    push(id);
  }
  return grad;
}

std::unique_ptr<Policy> TabularPolicy::clone() const {
  return std::make_unique<TabularPolicy>(*this);
}

void TabularPolicy::randomize(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  for (double& x : logits_) x = (unit_double(rng) - 0.5) * 2.0 * scale;
}

void TabularPolicy::save(const std::string& path) const {
  json j;
  j["format_version"] = 1;
  j["vocab"] = vocab_;
  j["context_order"] = context_order_;
  j["logits"] = logits_;
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw Error("store_io", "cannot write checkpoint: " + path);
  out << j.dump() << "\n";
  if (!out.flush()) throw Error("store_io", "short checkpoint write: " + path);
}

TabularPolicy TabularPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("store_io", "cannot read checkpoint: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("format_version") ||
      !j.contains("vocab") || !j.contains("context_order") ||
      !j.contains("logits")) {
    throw Error("checkpoint_format", "malformed checkpoint: " + path);
  }
  if (j["format_version"].get<int>() != 1) {
    throw Error("checkpoint_format", "unsupported checkpoint version");
  }
  TabularPolicy policy(j["vocab"].get<std::vector<std::string>>(),
                       j["context_order"].get<int>());
  auto logits = j["logits"].get<std::vector<double>>();
  if (logits.size() != policy.logits_.size()) {
    throw Error("checkpoint_format", "logits size mismatch");
  }
  policy.logits_ = std::move(logits);
  return policy;
}

void GrpoConfig::validate() const {
  if (rollouts < 2) throw Error("invalid_config", "rollouts must be >= 2");
  if (!(clip > 0.0 && clip < 1.0)) {
    throw Error("invalid_config", "clip must be in (0,1)");
  }
  if (kl_beta < 0.0) throw Error("invalid_config", "kl_beta must be >= 0");
  if (learning_rate <= 0.0) {
    throw Error("invalid_config", "learning_rate must be > 0");
  }
  if (group_batch < 1) throw Error("invalid_config", "group_batch must be >= 1");
  if (advantage_epsilon <= 0.0) {
    throw Error("invalid_config", "advantage_epsilon must be > 0");
  }
  if (max_response_len < 1) {
    throw Error("invalid_config", "max_response_len must be >= 1");
  }
  if (max_grad_norm < 0.0) {
    throw Error("invalid_config", "max_grad_norm must be >= 0");
  }
}

SftResult sft_nll(
    const Policy& policy,
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>>& batch) {
  if (batch.empty()) throw Error("invalid_argument", "empty sft batch");
  SftResult result;
  result.grad.assign(policy.param_count(), 0.0);
  for (const auto& [prompt, target] : batch) {
    result.loss -= total_log_prob(policy, prompt, target);
    const std::vector<double> g = policy.grad_log_prob(prompt, target);
    for (std::size_t i = 0; i < g.size(); ++i) result.grad[i] -= g[i];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv;
  for (double& g : result.grad) g *= inv;
  return result;
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double epsilon) {
  if (rewards.size() < 2) {
    throw Error("invalid_argument", "need at least 2 rewards");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  const double std_dev = std::sqrt(var);
  std::vector<double> out(rewards.size(), 0.0);
  if (std_dev < epsilon) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / std_dev;
  }
  return out;
}

double kl_k3(double logp_ref, double logp_theta) {
  const double log_ratio = logp_ref - logp_theta;
  const double t = saturated_ratio(log_ratio);
  return t - std::min(log_ratio, kMaxLogRatio) - 1.0;
}

GrpoEval grpo_objective(const RolloutGroup& group, const GrpoConfig& cfg,
                        const Policy& policy) {
  const std::size_t n = group.responses.size();
  if (n < 2 || group.rewards.size() != n || group.logp_old.size() != n ||
      group.logp_ref.size() != n) {
    throw Error("invalid_argument", "malformed rollout group");
  }
  const std::vector<double> adv =
      normalize_advantages(group.rewards, cfg.advantage_epsilon);

  GrpoEval eval;
  eval.grad.assign(policy.param_count(), 0.0);
  const double lo = 1.0 - cfg.clip;
  const double hi = 1.0 + cfg.clip;
  for (std::size_t i = 0; i < n; ++i) {
    const double lp_theta =
        total_log_prob(policy, group.prompt, group.responses[i]);
    if (!std::isfinite(lp_theta) || !std::isfinite(group.logp_old[i]) ||
        !std::isfinite(group.logp_ref[i])) {
      throw Error("nonfinite_logprob", "response " + std::to_string(i));
    }
    const double ratio = std::exp(lp_theta - group.logp_old[i]);
    const double unclipped = ratio * adv[i];
    const double clipped = std::clamp(ratio, lo, hi) * adv[i];
    const bool take_clipped = clipped < unclipped;
    const double t = saturated_ratio(group.logp_ref[i] - lp_theta);
    const double kl = t - std::min(group.logp_ref[i] - lp_theta, kMaxLogRatio) -
                      1.0;
    eval.objective += std::min(unclipped, clipped) - cfg.kl_beta * kl;
    eval.mean_ratio += ratio;
    eval.mean_kl += kl;
    if (take_clipped) eval.clip_fraction += 1.0;

    double coeff = cfg.kl_beta * (t - 1.0);
    if (!take_clipped) coeff += unclipped;
    if (coeff != 0.0) {
      const std::vector<double> g =
          policy.grad_log_prob(group.prompt, group.responses[i]);
      for (std::size_t k = 0; k < g.size(); ++k) eval.grad[k] += coeff * g[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  eval.objective *= inv;
  eval.mean_ratio *= inv;
  eval.mean_kl *= inv;
  eval.clip_fraction *= inv;
  for (double& g : eval.grad) g *= inv;
  return eval;
}

std::string response_text(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (tok == kBosToken || tok == kEosToken) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  if (out.empty()) out = kEosToken;
  return out;
}

RolloutGroup rollout_group(const Policy& policy_old, const Policy& policy_ref,
                           const std::vector<std::string>& prompt,
                           const std::string& reference, const GrpoConfig& cfg,
                           const RewardFn& reward_fn, std::uint64_t seed) {
  RolloutGroup group;
  group.prompt = prompt;
  group.reference = reference;
  for (int i = 0; i < cfg.rollouts; ++i) {
    std::vector<std::string> tokens =
        policy_old.sample(prompt, cfg.max_response_len, seed + i);
    const double reward = reward_fn(response_text(tokens), reference);
    if (!std::isfinite(reward)) {
      throw Error("invalid_argument", "non-finite reward");
    }
    std::vector<double> lp_old = policy_old.token_log_probs(prompt, tokens);
    std::vector<double> lp_ref = policy_ref.token_log_probs(prompt, tokens);
    double old_total = 0.0;
    double ref_total = 0.0;
    for (double x : lp_old) old_total += x;
    for (double x : lp_ref) ref_total += x;
    group.responses.push_back(std::move(tokens));
    group.rewards.push_back(reward);
    group.logp_old.push_back(old_total);
    group.logp_ref.push_back(ref_total);
    group.logp_theta.push_back(old_total);
    group.logp_old_tokens.push_back(std::move(lp_old));
    group.logp_ref_tokens.push_back(std::move(lp_ref));
  }
  return group;
}

TrainResult train(TabularPolicy& policy,
                  const std::vector<TrainExample>& dataset,
                  const GrpoConfig& cfg, const RewardFn& reward_fn, int steps,
                  const TrainIo& io) {
  cfg.validate();
  if (steps < 0) throw Error("invalid_argument", "steps must be >= 0");
  if (dataset.empty() && steps > 0) {
    throw Error("invalid_argument", "empty dataset");
  }

  std::ofstream run_log;
  if (!io.run_log_path.empty()) {
    run_log.open(io.run_log_path, std::ios::out | std::ios::trunc);
    if (!run_log) throw Error("store_io", "cannot write " + io.run_log_path);
  }
  auto checkpoint = [&] {
    if (!io.checkpoint_path.empty()) policy.save(io.checkpoint_path);
  };

  const std::unique_ptr<Policy> ref = policy.clone();
  std::mt19937_64 prompt_rng(cfg.seed);
  TrainResult result;

  for (int step = 0; step < steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::unique_ptr<Policy> old = policy.clone();

    std::vector<double> grad(policy.param_count(), 0.0);
    TrainStepStats stats;
    stats.step = step;
    double total_responses = 0.0;

    for (int g = 0; g < cfg.group_batch; ++g) {
      const std::size_t idx =
          static_cast<std::size_t>(prompt_rng() % dataset.size());
      const std::uint64_t rollout_seed =
          mix64(cfg.seed, static_cast<std::uint64_t>(step) + 1,
                static_cast<std::uint64_t>(g) + 1);
      const RolloutGroup group =
          rollout_group(*old, *ref, dataset[idx].prompt,
                        dataset[idx].reference, cfg, reward_fn, rollout_seed);
      const GrpoEval eval = grpo_objective(group, cfg, policy);
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += eval.grad[k];
      stats.clip_fraction += eval.clip_fraction;
      stats.mean_kl += eval.mean_kl;
      for (std::size_t i = 0; i < group.responses.size(); ++i) {
        stats.mean_reward += group.rewards[i];
        int content = 0;
        for (const auto& tok : group.responses[i]) {
          if (tok != kBosToken && tok != kEosToken) ++content;
        }
        stats.mean_len += content;
        total_responses += 1.0;
      }
    }

    const double inv_batch = 1.0 / static_cast<double>(cfg.group_batch);
    for (double& x : grad) x *= inv_batch;
    stats.clip_fraction *= inv_batch;
    stats.mean_kl *= inv_batch;
    stats.mean_reward /= total_responses;
    stats.mean_len /= total_responses;

    double norm_sq = 0.0;
    bool finite = true;
    for (double x : grad) {
      if (!std::isfinite(x)) {
        finite = false;
        break;
      }
      norm_sq += x * x;
    }
    if (!finite || !std::isfinite(norm_sq)) {
      checkpoint();
      throw Error("diverged",
                  "non-finite gradient at step " + std::to_string(step));
    }
    double scale = cfg.learning_rate;
    if (cfg.max_grad_norm > 0.0) {
      const double norm = std::sqrt(norm_sq);
      if (norm > cfg.max_grad_norm) scale *= cfg.max_grad_norm / norm;
    }

    std::vector<double> params = policy.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k] += scale * grad[k];
    }
    policy.set_params(params);

    stats.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.steps.push_back(stats);
    if (run_log.is_open()) {
      nlohmann::ordered_json rec;
      rec["step"] = stats.step;
      rec["mean_reward"] = stats.mean_reward;
      rec["mean_len"] = stats.mean_len;
      rec["clip_frac"] = stats.clip_fraction;
      rec["mean_kl"] = stats.mean_kl;
      rec["wall_ms"] = stats.wall_ms;
      run_log << rec.dump() << "\n";
    }
  }
  checkpoint();
  return result;
}

double mean_sequence_kl(const Policy& policy, const Policy& ref,
                        const std::vector<TrainExample>& dataset,
                        const GrpoConfig& cfg, std::uint64_t seed) {
  if (dataset.empty()) throw Error("invalid_argument", "empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::vector<std::string> resp = policy.sample(
        dataset[i].prompt, cfg.max_response_len, mix64(seed, i + 1, 0));
    const double lp_theta = total_log_prob(policy, dataset[i].prompt, resp);
    const double lp_ref = total_log_prob(ref, dataset[i].prompt, resp);
    total += kl_k3(lp_ref, lp_theta);
  }
  return total / static_cast<double>(dataset.size());
}

}  // namespace admix
