#include "admix/reward.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>

#include "admix/error.hpp"
#include "admix/hash.hpp"
#include "admix/prompts.hpp"
#include "httplib.h"
#include "json.hpp"

namespace admix {

using nlohmann::json;

std::string_view judge_mode_name(JudgeMode mode) {
  switch (mode) {
    case JudgeMode::kRemote:
      return "remote";
    case JudgeMode::kReplay:
      return "replay";
    case JudgeMode::kFallback:
      return "fallback";
  }
  return "fallback";
}

JudgeMode judge_mode_from_name(std::string_view name) {
  if (name == "remote") return JudgeMode::kRemote;
  if (name == "replay") return JudgeMode::kReplay;
  if (name == "fallback") return JudgeMode::kFallback;
  throw Error("invalid_config", "unknown judge_mode: " + std::string(name));
}

void RewardConfig::validate() const {
  if (!(gamma >= 0.0)) {
    throw Error("invalid_config", "gamma must be >= 0");
  }
  if (max_n < 1) {
    throw Error("invalid_config", "max_n must be >= 1");
  }
  if (judge_mode == JudgeMode::kRemote && judge_endpoint.empty() &&
      std::getenv("ADMIX_JUDGE_URL") == nullptr) {
    throw Error("invalid_config", "remote judge_mode requires judge_endpoint");
  }
  if (judge_mode == JudgeMode::kReplay && judge_replay_path.empty()) {
    throw Error("invalid_config", "replay judge_mode requires judge_replay_path");
  }
  if (judge_retries < 0 || judge_timeout_ms <= 0 || judge_max_inflight < 1) {
    throw Error("invalid_config", "judge limits must be positive");
  }
}

double fallback_token_f1(std::string_view o, std::string_view y) {
  const TokenSeq to = tokenize(o, Tokenizer::kCjkChar);
  const TokenSeq ty = tokenize(y, Tokenizer::kCjkChar);
  if (to.tokens.empty() && ty.tokens.empty()) return 1.0;
  if (to.tokens.empty() || ty.tokens.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : to.tokens) ++counts[t];
  int overlap = 0;
  for (const auto& t : ty.tokens) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / to.tokens.size();
  const double r = static_cast<double>(overlap) / ty.tokens.size();
  return 2.0 * p * r / (p + r);
}

namespace {

struct UrlParts {
  std::string base;  // scheme://host:port
  std::string path;
};

UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.base = url;
    parts.path = "/";
  } else {
    parts.base = url.substr(0, path_start);
    parts.path = url.substr(path_start);
  }
  return parts;
}

JudgeVerdict parse_verdict(const json& body) {
  if (!body.is_object() || !body.contains("score") ||
      !body["score"].is_number() || !body.contains("pass") ||
      !body["pass"].is_boolean()) {
    throw Error("judge_protocol", "verdict missing score/pass");
  }
  JudgeVerdict v;
  v.score = body["score"].get<double>();
  v.pass = body["pass"].get<bool>();
  if (body.contains("reason") && body["reason"].is_string()) {
    v.reason = body["reason"].get<std::string>();
  }
  if (!(v.score >= 0.0 && v.score <= 1.0)) {
    throw Error("judge_protocol", "score outside [0,1]");
  }
  return v;
}

}  // namespace

struct JudgeClient::Impl {
  RewardConfig cfg;
  std::string endpoint;
  std::string default_prompt_ver;
  std::unordered_map<std::string, JudgeVerdict> replay;

  std::mutex record_mu;
  std::ofstream record;

  std::mutex inflight_mu;
  std::condition_variable inflight_cv;
  int inflight = 0;

  JudgeVerdict remote_judge(const JudgeRequest& req,
                            const std::string& prompt_ver) {
    {
      std::unique_lock<std::mutex> lock(inflight_mu);
      inflight_cv.wait(lock, [&] { return inflight < cfg.judge_max_inflight; });
      ++inflight;
    }
    struct Release {
      Impl* self;
      ~Release() {
        {
          std::lock_guard<std::mutex> lock(self->inflight_mu);
          --self->inflight;
        }
        self->inflight_cv.notify_one();
      }
    } release{this};

    json payload;
    payload["prompt_version"] = prompt_ver;
    payload["reference"] = req.reference;
    payload["candidate"] = req.candidate;
    if (!req.asr.empty()) payload["asr"] = req.asr;
    if (!req.ocr.empty()) payload["ocr"] = req.ocr;
    if (req.relevance_label >= 0) payload["label"] = req.relevance_label;
    const std::string body = payload.dump();

    const UrlParts url = split_url(endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(cfg.judge_timeout_ms / 1000,
                                  (cfg.judge_timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg.judge_timeout_ms / 1000,
                            (cfg.judge_timeout_ms % 1000) * 1000);

    std::string last_error = "no attempt";
    for (int attempt = 0; attempt <= cfg.judge_retries; ++attempt) {
      auto res = client.Post(url.path, body, "application/json");
      if (!res) {
        last_error = "transport: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error("judge_protocol",
                    "unexpected status " + std::to_string(res->status));
      }
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        throw Error("judge_protocol", "unparseable verdict body");
      }
      return parse_verdict(parsed);
    }
    throw Error("judge_unavailable", endpoint + " (" + last_error + ")");
  }
};

JudgeClient::JudgeClient(const RewardConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  impl_->cfg = cfg;
  impl_->default_prompt_ver = prompt_version(kQualityWithReferenceTemplate);
  impl_->endpoint = cfg.judge_endpoint;
  if (const char* env = std::getenv("ADMIX_JUDGE_URL")) {
    if (*env != '\0') impl_->endpoint = env;
  }
  if (cfg.judge_mode == JudgeMode::kReplay) {
    std::ifstream in(cfg.judge_replay_path);
    if (!in) {
      throw Error("invalid_config",
                  "cannot open replay fixture: " + cfg.judge_replay_path);
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.contains("key") ||
          !rec.contains("verdict")) {
        throw Error("judge_protocol",
                    "bad replay line " + std::to_string(line_no) + " in " +
                        cfg.judge_replay_path);
      }
      impl_->replay[rec["key"].get<std::string>()] =
          parse_verdict(rec["verdict"]);
    }
  }
}

JudgeClient::~JudgeClient() = default;

void JudgeClient::record_to(const std::string& path) {
  std::lock_guard<std::mutex> lock(impl_->record_mu);
  impl_->record.open(path, std::ios::out | std::ios::trunc);
  if (!impl_->record) {
    throw Error("store_io", "cannot open record sink: " + path);
  }
}

std::string JudgeClient::replay_key(std::string_view candidate,
                                    std::string_view reference,
                                    std::string_view prompt_ver) {
  return content_digest({candidate, reference, prompt_ver});
}

const std::string& JudgeClient::default_prompt_version() const {
  return impl_->default_prompt_ver;
}

JudgeMode JudgeClient::mode() const { return impl_->cfg.judge_mode; }

JudgeVerdict JudgeClient::judge(const JudgeRequest& req) {
  const std::string& prompt_ver =
      req.prompt_ver.empty() ? impl_->default_prompt_ver : req.prompt_ver;
  const std::string key = replay_key(req.candidate, req.reference, prompt_ver);

  JudgeVerdict verdict;
  switch (impl_->cfg.judge_mode) {
    case JudgeMode::kRemote:
      verdict = impl_->remote_judge(req, prompt_ver);
      break;
    case JudgeMode::kReplay: {
      auto it = impl_->replay.find(key);
      if (it == impl_->replay.end()) {
        throw Error("judge_unavailable", "no replay verdict for key " + key);
      }
      verdict = it->second;
      break;
    }
    case JudgeMode::kFallback: {
      const double f1 = fallback_token_f1(req.candidate, req.reference);
      if (req.relevance_label >= 0) {
        // Agreement with the labeled judgment: similarity supports label 1,
        // dissimilarity supports label 0.
        verdict.score = req.relevance_label == 1 ? f1 : 1.0 - f1;
        verdict.reason = "token_f1_agreement";
      } else {
        verdict.score = f1;
        verdict.reason = "token_f1";
      }
      verdict.pass = verdict.score >= 0.5;
      break;
    }
  }

  {
    std::lock_guard<std::mutex> lock(impl_->record_mu);
    if (impl_->record.is_open()) {
      json rec;
      rec["key"] = key;
      rec["verdict"] = {{"score", verdict.score},
                        {"pass", verdict.pass},
                        {"reason", verdict.reason}};
      impl_->record << rec.dump() << "\n";
      impl_->record.flush();
    }
  }
  return verdict;
}

double length_penalty(int o_len, int y_len, double gamma) {
  if (o_len < 1 || y_len < 1) {
    throw Error("invalid_argument", "length_penalty requires positive lengths");
  }
  if (gamma < 0.0) {
    throw Error("invalid_argument", "gamma must be >= 0");
  }
  const double ratio =
      std::min(1.0, static_cast<double>(y_len) / static_cast<double>(o_len));
  return std::pow(ratio, gamma);
}

double reward_lex(const TokenSeq& o, const TokenSeq& y,
                  const RewardConfig& cfg) {
  return bleu(o, {y}, cfg.max_n, BleuSmoothing::kAddOneHighOrder);
}

JudgeVerdict reward_sem(const std::string& o, const std::string& y,
                        const RewardConfig& cfg, JudgeClient& judge,
                        const std::string& asr, const std::string& ocr) {
  JudgeRequest req;
  req.candidate = o;
  req.reference = y;
  if (cfg.judge_send_context) {
    req.asr = asr;
    req.ocr = ocr;
  }
  return judge.judge(req);
}

RewardBreakdown mixed_reward(const std::string& o, const std::string& y,
                             const RewardConfig& cfg, JudgeClient& judge,
                             const std::string& asr, const std::string& ocr) {
  const TokenSeq to = tokenize(o, cfg.tokenizer);
  const TokenSeq ty = tokenize(y, cfg.tokenizer);
  RewardBreakdown out;
  out.lexical = reward_lex(to, ty, cfg);
  out.penalty = length_penalty(static_cast<int>(to.tokens.size()),
                               static_cast<int>(ty.tokens.size()), cfg.gamma);
  out.semantic = reward_sem(o, y, cfg, judge, asr, ocr).score;
  out.total = out.lexical + out.penalty * out.semantic;
  return out;
}

}  // namespace admix
