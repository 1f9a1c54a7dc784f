#ifndef ADMIX_SERVING_HPP_
#define ADMIX_SERVING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace admix {

struct StoreEntry {
  std::string summary;
  int version = 0;
  std::int64_t updated_at = 0;  // logical operation counter

  bool operator==(const StoreEntry&) const = default;
};

// ad_id keyed summary cache with versioned entries and snapshot persistence.
// Many readers, one writer.
class SummaryStore {
 public:
  SummaryStore() = default;
  SummaryStore(const SummaryStore& other);
  SummaryStore& operator=(const SummaryStore& other);

  int put(const std::string& ad_id, const std::string& summary);
  std::optional<StoreEntry> get(const std::string& ad_id) const;
  std::size_t size() const;
  std::vector<std::pair<std::string, StoreEntry>> entries_sorted() const;

  // Length-prefixed JSON records sorted by ad_id behind a format header;
  // written to a temp file then renamed into place.
  void save_snapshot(const std::string& path) const;
  static SummaryStore load_snapshot(const std::string& path);

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, StoreEntry> entries_;
  std::int64_t op_counter_ = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& text) const = 0;
  virtual int dim() const = 0;
  virtual std::string provider_id() const = 0;
};

// Hashed bag of character 3-grams over the raw codepoint stream (spaces
// included; texts shorter than 3 codepoints hash as one gram). Buckets come
// from FNV-1a, signs from a second FNV seed, and the result is L2-normalized.
// Empty text embeds to the zero vector.
class HashedNgramEmbedder : public EmbeddingProvider {
 public:
  explicit HashedNgramEmbedder(int dim = 256);
  std::vector<double> embed(const std::string& text) const override;
  int dim() const override { return dim_; }
  std::string provider_id() const override;

 private:
  int dim_;
};

struct ScoredId {
  std::string ad_id;
  double score = 0.0;
};

// Brute-force cosine index. Rows are L2-normalized at insert; results are
// ordered by descending score with ad_id-ascending tie-breaks.
class RetrievalIndex {
 public:
  static RetrievalIndex build(const SummaryStore& store,
                              const EmbeddingProvider& provider);
  static RetrievalIndex build(
      const std::vector<std::pair<std::string, std::string>>& id_texts,
      const EmbeddingProvider& provider);

  std::vector<ScoredId> query_topk(const std::string& query, int k,
                                   const EmbeddingProvider& provider) const;

  std::size_t size() const { return ids_.size(); }
  int dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }

  void save(const std::string& path) const;
  static RetrievalIndex load(const std::string& path);

 private:
  std::vector<std::string> ids_;
  std::vector<double> vectors_;  // row-major |ids| x dim
  int dim_ = 0;
  std::string provider_id_;
};

double relevance_score(const std::string& query, const std::string& summary,
                       const EmbeddingProvider& provider);

using RelevanceScorer =
    std::function<double(const std::string& query, const std::string& summary)>;

std::vector<ScoredId> rank_candidates(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    const RelevanceScorer& scorer);

std::vector<ScoredId> rank_candidates(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    const EmbeddingProvider& provider);

struct EvalRun {
  // query_id -> ranking, best first
  std::map<std::string, std::vector<ScoredId>> rankings;
  // query_id -> ad_id -> label in {0,1}
  std::map<std::string, std::map<std::string, int>> qrels;
};

// TREC-style whitespace-separated columns: query_id ad_id rank score.
void load_run_file(const std::string& path, EvalRun* run);
// Columns: query_id ad_id label.
void load_qrels_file(const std::string& path, EvalRun* run);
void save_run_file(const std::string& path, const EvalRun& run);

// Mean over queries of |positives in top-k| / |positives|. Queries without
// positives are skipped and reported through skipped_queries.
double hit_at_k(const EvalRun& run, int k, int* skipped_queries = nullptr);

// Mann-Whitney statistic (wins + 0.5 * ties) / (P * N).
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

// Max recall over thresholds whose precision is >= p; 0 when none qualifies.
double recall_at_precision(const std::vector<double>& scores,
                           const std::vector<int>& labels, double p = 0.90);

// |union of retrieved ids| / (|queries| * k).
double diversity_ratio(const RetrievalIndex& index,
                       const std::vector<std::string>& queries, int k,
                       const EmbeddingProvider& provider);

// Deterministic single-token perturbations: each seed query yields itself
// plus `variants` copies with one token duplicated or dropped.
std::vector<std::string> make_near_duplicate_queries(
    const std::vector<std::string>& seeds, int variants);

// diversity_ratio evaluated over a near-duplicate query set.
double granularity_ratio(const RetrievalIndex& index,
                         const std::vector<std::string>& near_duplicates,
                         int k, const EmbeddingProvider& provider);

enum class QualityLabel { kGood, kBad };

double irrelevant_ratio(const std::vector<QualityLabel>& labels);

// Thin HTTP wrapper: GET /summary/<ad_id>, POST /query {"query","k"}.
// Blocks until stop() is observed; listen failures raise "serve_bind".
class SummaryService {
 public:
  SummaryService(const SummaryStore& store, const RetrievalIndex& index,
                 const EmbeddingProvider& provider);
  ~SummaryService();

  // Binds immediately; returns the bound port (useful with port 0).
  int start(const std::string& host, int port);
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace admix

#endif  // ADMIX_SERVING_HPP_
