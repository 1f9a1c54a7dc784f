#ifndef ADMIX_REWARD_HPP_
#define ADMIX_REWARD_HPP_

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "admix/textmetrics.hpp"

namespace admix {

enum class JudgeMode {
  kRemote,    // HTTP judge service
  kReplay,    // recorded verdicts keyed by content hash
  kFallback,  // hermetic token-F1 stand-in
};

std::string_view judge_mode_name(JudgeMode mode);
JudgeMode judge_mode_from_name(std::string_view name);

struct RewardConfig {
  double gamma = 1.0;  // length-penalty exponent
  int max_n = 4;       // BLEU order
  Tokenizer tokenizer = Tokenizer::kUnicodeWord;
  JudgeMode judge_mode = JudgeMode::kFallback;
  std::string judge_endpoint;
  std::string judge_replay_path;
  int judge_retries = 2;        // extra attempts after the first
  int judge_timeout_ms = 5000;
  int judge_max_inflight = 4;
  bool judge_send_context = false;  // forward asr/ocr alongside the summaries

  void validate() const;  // throws Error("invalid_config")
};

struct JudgeVerdict {
  double score = 0.0;  // in [0,1]
  bool pass = false;
  std::string reason;
};

struct JudgeRequest {
  std::string prompt_ver;  // empty → client's default quality prompt
  std::string reference;
  std::string candidate;
  std::string asr;
  std::string ocr;
  int relevance_label = -1;  // 0/1 for relevance checks, -1 otherwise
};

// Scores candidate summaries. Remote mode talks to an HTTP service, replay
// mode serves recorded verdicts, fallback mode computes token F1 locally.
// Thread-safe; remote calls are bounded by judge_max_inflight.
class JudgeClient {
 public:
  explicit JudgeClient(const RewardConfig& cfg);
  ~JudgeClient();

  JudgeClient(const JudgeClient&) = delete;
  JudgeClient& operator=(const JudgeClient&) = delete;

  JudgeVerdict judge(const JudgeRequest& req);

  // Appends every served verdict as a replay line {"key":..,"verdict":..}.
  void record_to(const std::string& path);

  static std::string replay_key(std::string_view candidate,
                                std::string_view reference,
                                std::string_view prompt_ver);

  const std::string& default_prompt_version() const;
  JudgeMode mode() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Deterministic semantic stand-in: token-level F1 under character
// tokenization. Symmetric in its arguments.
double fallback_token_f1(std::string_view o, std::string_view y);

// min(1, y_len/o_len)^gamma. Lengths are token counts.
double length_penalty(int o_len, int y_len, double gamma);

double reward_lex(const TokenSeq& o, const TokenSeq& y,
                  const RewardConfig& cfg);

// asr/ocr reach the judge only when cfg.judge_send_context is set.
JudgeVerdict reward_sem(const std::string& o, const std::string& y,
                        const RewardConfig& cfg, JudgeClient& judge,
                        const std::string& asr = "",
                        const std::string& ocr = "");

struct RewardBreakdown {
  double lexical = 0.0;
  double semantic = 0.0;
  double penalty = 0.0;
  double total = 0.0;  // lexical + penalty * semantic, in [0,2]
};

RewardBreakdown mixed_reward(const std::string& o, const std::string& y,
                             const RewardConfig& cfg, JudgeClient& judge,
                             const std::string& asr = "",
                             const std::string& ocr = "");

}  // namespace admix

#endif  // ADMIX_REWARD_HPP_
