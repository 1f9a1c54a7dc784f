#ifndef ADMIX_GRPO_HPP_
#define ADMIX_GRPO_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace admix {

inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kEosToken = "<eos>";

// Autoregressive policy over a closed token vocabulary. Gradients are with
// respect to the flat parameter vector; sampling is deterministic per seed.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::size_t param_count() const = 0;
  virtual std::vector<double> params() const = 0;
  virtual void set_params(const std::vector<double>& params) = 0;

  // Log-probability of each response token given prompt + previous tokens.
  virtual std::vector<double> token_log_probs(
      const std::vector<std::string>& prompt,
      const std::vector<std::string>& response) const = 0;

  // Draws tokens until <eos> or max_len. A natural stop keeps <eos> as the
  // final element; hitting max_len does not append one.
  virtual std::vector<std::string> sample(
      const std::vector<std::string>& prompt, int max_len,
      std::uint64_t seed) const = 0;

  // Gradient of the summed response log-probability.
  virtual std::vector<double> grad_log_prob(
      const std::vector<std::string>& prompt,
      const std::vector<std::string>& response) const = 0;

  virtual std::unique_ptr<Policy> clone() const = 0;
};

double total_log_prob(const Policy& policy,
                      const std::vector<std::string>& prompt,
                      const std::vector<std::string>& response);

// Dense logits table over contexts of the last `context_order` token ids.
// Contexts before the first token are padded with <bos>; prompt tokens
// outside the vocabulary map to <bos>.
class TabularPolicy : public Policy {
 public:
  TabularPolicy(std::vector<std::string> vocab, int context_order);

  std::size_t param_count() const override;
  std::vector<double> params() const override;
  void set_params(const std::vector<double>& params) override;
  std::vector<double> token_log_probs(
      const std::vector<std::string>& prompt,
      const std::vector<std::string>& response) const override;
  std::vector<std::string> sample(const std::vector<std::string>& prompt,
                                  int max_len,
                                  std::uint64_t seed) const override;
  std::vector<double> grad_log_prob(
      const std::vector<std::string>& prompt,
      const std::vector<std::string>& response) const override;
  std::unique_ptr<Policy> clone() const override;

  void randomize(std::uint64_t seed, double scale);

  void save(const std::string& path) const;
  static TabularPolicy load(const std::string& path);

  const std::vector<std::string>& vocab() const { return vocab_; }
  int context_order() const { return context_order_; }
  int vocab_size() const { return static_cast<int>(vocab_.size()); }

 private:
  int token_id(const std::string& token, bool oov_to_bos) const;
  std::size_t context_index(const std::vector<int>& window) const;
  void row_log_probs(std::size_t ctx, std::vector<double>* out) const;

  std::vector<std::string> vocab_;
  int context_order_;
  int bos_id_;
  int eos_id_;
  std::vector<double> logits_;  // [context * V + token]
};

struct RolloutGroup {
  std::vector<std::string> prompt;
  std::string reference;
  std::vector<std::vector<std::string>> responses;
  std::vector<double> rewards;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<double> logp_theta;  // equals logp_old at sampling time
  std::vector<std::vector<double>> logp_old_tokens;
  std::vector<std::vector<double>> logp_ref_tokens;
};

struct GrpoConfig {
  int rollouts = 8;            // N responses per prompt
  double clip = 0.2;           // ratio clip half-width
  double kl_beta = 0.001;
  double learning_rate = 0.1;  // tabular-scale default
  int group_batch = 64;
  double advantage_epsilon = 1e-8;
  int max_response_len = 24;
  double max_grad_norm = 1.0;  // global-norm gradient clip; 0 disables
  std::uint64_t seed = 17;

  void validate() const;
};

struct SftResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean negative log-likelihood of targets with its gradient.
SftResult sft_nll(
    const Policy& policy,
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>>& batch);

// (r - mean) / population std; a near-zero std collapses the group to zeros.
std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double epsilon);

// k3 estimator t - ln t - 1 with t = exp(logp_ref - logp_theta).
double kl_k3(double logp_ref, double logp_theta);

struct GrpoEval {
  double objective = 0.0;
  std::vector<double> grad;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
};

GrpoEval grpo_objective(const RolloutGroup& group, const GrpoConfig& cfg,
                        const Policy& policy);

using RewardFn =
    std::function<double(const std::string& response, const std::string& reference)>;

// Joins non-special tokens with spaces; an empty result stands in as the
// <eos> literal so downstream rewards always see at least one token.
std::string response_text(const std::vector<std::string>& tokens);

RolloutGroup rollout_group(const Policy& policy_old, const Policy& policy_ref,
                           const std::vector<std::string>& prompt,
                           const std::string& reference, const GrpoConfig& cfg,
                           const RewardFn& reward_fn, std::uint64_t seed);

struct TrainExample {
  std::vector<std::string> prompt;
  std::string reference;
};

struct TrainStepStats {
  int step = 0;
  double mean_reward = 0.0;
  double mean_len = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
  std::int64_t wall_ms = 0;
};

struct TrainIo {
  std::string run_log_path;     // JSONL, one record per step
  std::string checkpoint_path;  // written at exit, also on divergence
};

struct TrainResult {
  std::vector<TrainStepStats> steps;
};

TrainResult train(TabularPolicy& policy,
                  const std::vector<TrainExample>& dataset,
                  const GrpoConfig& cfg, const RewardFn& reward_fn, int steps,
                  const TrainIo& io = {});

// Mean per-sequence k3 divergence of `policy` from `ref` over prompts,
// one sampled response per prompt.
double mean_sequence_kl(const Policy& policy, const Policy& ref,
                        const std::vector<TrainExample>& dataset,
                        const GrpoConfig& cfg, std::uint64_t seed);

}  // namespace admix

#endif  // ADMIX_GRPO_HPP_
