#ifndef ADMIX_SYNTHETIC_HPP_
#define ADMIX_SYNTHETIC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "admix/curation.hpp"
#include "admix/grpo.hpp"

namespace admix {

struct SyntheticConfig {
  int records = 200;
  int keyword_vocab = 30;  // content words; policy vocab adds <bos>/<eos>
  int min_keywords = 2;
  int max_keywords = 5;
  int noise_repeats = 2;         // extra draws per keyword in the stream
  double sparse_fraction = 0.3;  // records with under 10 chars of ASR+OCR
  std::uint64_t seed = 1;

  void validate() const;
};

// Fixed word list with low pairwise character overlap.
std::vector<std::string> keyword_vocab(int n);

struct RlTask {
  std::vector<std::string> policy_vocab;
  std::vector<TrainExample> examples;
};

// Keyword-summarization toy task: the prompt is a shuffled noisy keyword
// stream, the reference is the stream deduplicated in first-seen order.
RlTask make_rl_task(const SyntheticConfig& cfg);

struct SyntheticData {
  std::vector<AdRecord> records;
  std::map<std::string, std::string> references;  // ad_id -> keyword summary
  std::vector<RelevanceSample> relevance;
};

SyntheticData make_synthetic_records(const SyntheticConfig& cfg);

// Random keyword sentences for retrieval-scale tests.
std::vector<std::pair<std::string, std::string>> make_corpus(
    int docs, std::uint64_t seed);

// Sub-phrases of corpus documents, optionally with one extra vocabulary word.
std::vector<std::string> make_corpus_queries(
    const std::vector<std::pair<std::string, std::string>>& corpus, int count,
    std::uint64_t seed);

}  // namespace admix

#endif  // ADMIX_SYNTHETIC_HPP_
