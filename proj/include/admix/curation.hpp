#ifndef ADMIX_CURATION_HPP_
#define ADMIX_CURATION_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "admix/reward.hpp"
#include "admix/textmetrics.hpp"

namespace admix {

struct AdRecord {
  std::string ad_id;
  std::string asr;
  std::string ocr;
  std::string visual_surrogate;
  std::map<std::string, std::string> metadata;

  void validate() const;  // throws Error("invalid_record")
};

AdRecord parse_ad_record(const std::string& json_line);
std::string ad_record_to_json(const AdRecord& record);

struct RelevanceSample {
  std::string query;
  std::string ad_id;
  int label = 0;  // 0 or 1
};

RelevanceSample parse_relevance_sample(const std::string& json_line);

struct ModalityMask {
  bool use_asr = true;
  bool use_ocr = true;
  bool use_visual = true;
};

AdRecord apply_mask(const AdRecord& record, const ModalityMask& mask);

// Flattened prompt text with one section per populated modality.
std::string serialize_record_text(const AdRecord& record,
                                  const ModalityMask& mask = {});

// Brand/Subject markers plus deduplicated content keywords, capped at
// max_tokens. Empty when the record carries no usable content.
std::string salient_text(const AdRecord& record, int max_tokens);

struct CandidateSummary {
  std::string text;
  double temperature = 0.0;
  std::string error;  // generator failure code, empty when ok
  std::optional<JudgeVerdict> linguistic;
  std::optional<double> relevance_confidence;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const AdRecord& record, double temperature) = 0;
  virtual std::string id() const = 0;
};

// Deterministic extractive stub: salient_text with a budget of
// 6 + round(6 * temperature) tokens; no content → the refusal literal.
class TemplateGenerator : public Generator {
 public:
  std::string generate(const AdRecord& record, double temperature) override;
  std::string id() const override { return "template"; }
};

// POSTs the rendered synthesis prompt as JSON
// {"prompt_version","prompt","temperature"} and expects {"summary": string}.
class RemoteGenerator : public Generator {
 public:
  RemoteGenerator(std::string endpoint, int retries, int timeout_ms);
  std::string generate(const AdRecord& record, double temperature) override;
  std::string id() const override { return "remote"; }

 private:
  std::string endpoint_;
  int retries_;
  int timeout_ms_;
};

// Serves candidates recorded as JSONL {"key","summary"} where the key is a
// content hash of (ad_id, temperature, prompt_version).
class ReplayGenerator : public Generator {
 public:
  explicit ReplayGenerator(const std::string& fixture_path);
  std::string generate(const AdRecord& record, double temperature) override;
  std::string id() const override { return "replay"; }

  static std::string key_for(const std::string& ad_id, double temperature);

 private:
  std::map<std::string, std::string> fixture_;
};

std::vector<CandidateSummary> synthesize_candidates(
    const AdRecord& record, Generator& generator,
    const std::vector<double>& temperatures);

// Hard checks (generator error, empty, token budget, refusal literal) reject
// locally; surviving candidates are scored by the judge with the record's
// asr/ocr as context.
void linguistic_filter(std::vector<CandidateSummary>* candidates,
                       const AdRecord& record, JudgeClient& judge,
                       Tokenizer tokenizer = Tokenizer::kUnicodeWord,
                       int max_tokens = 40);

double relevance_confidence(const std::string& candidate_text,
                            const std::vector<RelevanceSample>& samples,
                            JudgeClient& judge);

enum class CurationStatus { kAccepted, kInsufficient, kAllRejected };

std::string_view curation_status_name(CurationStatus status);

struct CurationOutcome {
  std::string ad_id;
  CurationStatus status = CurationStatus::kAllRejected;
  std::optional<std::string> summary;
  std::vector<CandidateSummary> audit;
};

CurationOutcome select_best(const AdRecord& record,
                            const std::vector<CandidateSummary>& candidates);

enum class GeneratorMode { kTemplate, kRemote, kReplay };

std::string_view generator_mode_name(GeneratorMode mode);
GeneratorMode generator_mode_from_name(std::string_view name);

struct CurationConfig {
  std::vector<double> temperatures = {0.2, 0.6, 1.0};
  GeneratorMode generator_mode = GeneratorMode::kTemplate;
  std::string generator_endpoint;
  std::string generator_replay_path;
  RewardConfig judge;  // judge_* fields drive the two filter judges
  ModalityMask mask;
  int workers = 4;
  int max_summary_tokens = 40;
  std::string judge_record_path;  // optional sink for replay fixtures

  void validate() const;
};

struct CurationReport {
  int records = 0;
  int malformed = 0;
  int accepted = 0;
  int insufficient = 0;
  int all_rejected = 0;
  std::vector<int> confidence_histogram = std::vector<int>(10, 0);
  std::vector<int> linguistic_histogram = std::vector<int>(10, 0);
};

std::string curation_report_to_json(const CurationReport& report);

// Reads records + relevance samples, runs the full pipeline with a bounded
// worker pool, writes <out_dir>/sft.jsonl and <out_dir>/report.json in
// ad_id order.
CurationReport build_dataset(const std::string& records_path,
                             const std::string& relevance_path,
                             const std::string& out_dir,
                             const CurationConfig& cfg);

std::unique_ptr<Generator> make_generator(const CurationConfig& cfg);

// Prompt-version tag for relevance verdicts; the label is part of the
// instantiated prompt, so it is folded into the replay key.
std::string relevance_prompt_version(int label);

std::string quality_prompt_version();

}  // namespace admix

#endif  // ADMIX_CURATION_HPP_
