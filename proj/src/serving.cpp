#include "admix/serving.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "admix/error.hpp"
#include "admix/hash.hpp"
#include "admix/utf8.hpp"
#include "httplib.h"
#include "json.hpp"

namespace admix {

using nlohmann::json;

SummaryStore::SummaryStore(const SummaryStore& other) {
  std::shared_lock lock(other.mu_);
  entries_ = other.entries_;
  op_counter_ = other.op_counter_;
}

SummaryStore& SummaryStore::operator=(const SummaryStore& other) {
  if (this == &other) return *this;
  std::map<std::string, StoreEntry> entries;
  std::int64_t counter = 0;
  {
    std::shared_lock lock(other.mu_);
    entries = other.entries_;
    counter = other.op_counter_;
  }
  std::unique_lock lock(mu_);
  entries_ = std::move(entries);
  op_counter_ = counter;
  return *this;
}

int SummaryStore::put(const std::string& ad_id, const std::string& summary) {
  if (ad_id.empty()) throw Error("invalid_argument", "empty ad_id");
  std::unique_lock lock(mu_);
  StoreEntry& entry = entries_[ad_id];
  entry.summary = summary;
  entry.version += 1;
  entry.updated_at = ++op_counter_;
  return entry.version;
}

std::optional<StoreEntry> SummaryStore::get(const std::string& ad_id) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(ad_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t SummaryStore::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::vector<std::pair<std::string, StoreEntry>> SummaryStore::entries_sorted()
    const {
  std::shared_lock lock(mu_);
  return {entries_.begin(), entries_.end()};
}

namespace {

void write_frame(std::ofstream& out, const std::string& payload) {
  const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
  unsigned char frame[4];
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(frame), 4);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

bool read_frame(std::ifstream& in, std::string* payload) {
  unsigned char frame[4];
  if (!in.read(reinterpret_cast<char*>(frame), 4)) return false;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(frame[i]) << (8 * i);
  payload->resize(len);
  if (!in.read(payload->data(), static_cast<std::streamsize>(len))) {
    throw Error("store_io", "truncated snapshot frame");
  }
  return true;
}

}  // namespace

void SummaryStore::save_snapshot(const std::string& path) const {
  const auto entries = entries_sorted();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("store_io", "cannot write " + tmp);
    json header;
    header["format_version"] = 1;
    write_frame(out, header.dump());
    for (const auto& [ad_id, entry] : entries) {
      json rec;
      rec["ad_id"] = ad_id;
      rec["summary"] = entry.summary;
      rec["version"] = entry.version;
      rec["updated_at"] = entry.updated_at;
      write_frame(out, rec.dump());
    }
    if (!out.flush()) throw Error("store_io", "short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("store_io", "rename failed: " + ec.message());
}

SummaryStore SummaryStore::load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("store_io", "cannot read " + path);
  std::string payload;
  if (!read_frame(in, &payload)) {
    throw Error("store_io", "empty snapshot: " + path);
  }
  json header = json::parse(payload, nullptr, false);
  if (header.is_discarded() || !header.contains("format_version") ||
      header["format_version"].get<int>() != 1) {
    throw Error("store_io", "unsupported snapshot header: " + path);
  }
  SummaryStore store;
  while (read_frame(in, &payload)) {
    json rec = json::parse(payload, nullptr, false);
    if (rec.is_discarded() || !rec.contains("ad_id") ||
        !rec.contains("summary") || !rec.contains("version") ||
        !rec.contains("updated_at")) {
      throw Error("store_io", "malformed snapshot record in " + path);
    }
    StoreEntry entry;
    entry.summary = rec["summary"].get<std::string>();
    entry.version = rec["version"].get<int>();
    entry.updated_at = rec["updated_at"].get<std::int64_t>();
    store.op_counter_ = std::max(store.op_counter_, entry.updated_at);
    store.entries_[rec["ad_id"].get<std::string>()] = std::move(entry);
  }
  return store;
}

namespace {

constexpr std::uint64_t kSignSeed = 0x9ae16a3b2f90404fULL;

}  // namespace

HashedNgramEmbedder::HashedNgramEmbedder(int dim) : dim_(dim) {
  if (dim < 1) throw Error("invalid_argument", "embedding dim must be >= 1");
}

std::string HashedNgramEmbedder::provider_id() const {
  return "hashed_char3_d" + std::to_string(dim_);
}

std::vector<double> HashedNgramEmbedder::embed(const std::string& text) const {
  std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
  if (text.empty()) return v;
  const std::vector<std::uint32_t> cps = utf8_codepoints(text);
  auto accumulate = [&](const std::string& gram) {
    const std::uint64_t bucket =
        fnv1a64(gram) % static_cast<std::uint64_t>(dim_);
    const double sign = (fnv1a64(gram, kSignSeed) & 1) ? 1.0 : -1.0;
    v[bucket] += sign;
  };
  if (cps.size() < 3) {
    accumulate(text);
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      std::string gram = utf8_encode(cps[i]);
      gram += utf8_encode(cps[i + 1]);
      gram += utf8_encode(cps[i + 2]);
      accumulate(gram);
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

RetrievalIndex RetrievalIndex::build(const SummaryStore& store,
                                     const EmbeddingProvider& provider) {
  std::vector<std::pair<std::string, std::string>> id_texts;
  for (const auto& [ad_id, entry] : store.entries_sorted()) {
    id_texts.emplace_back(ad_id, entry.summary);
  }
  return build(id_texts, provider);
}

RetrievalIndex RetrievalIndex::build(
    const std::vector<std::pair<std::string, std::string>>& id_texts,
    const EmbeddingProvider& provider) {
  RetrievalIndex index;
  index.dim_ = provider.dim();
  index.provider_id_ = provider.provider_id();
  index.ids_.reserve(id_texts.size());
  index.vectors_.reserve(id_texts.size() * static_cast<std::size_t>(index.dim_));
  for (const auto& [ad_id, text] : id_texts) {
    std::vector<double> v = provider.embed(text);
    if (static_cast<int>(v.size()) != index.dim_) {
      throw Error("invalid_argument", "embedding dim mismatch");
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    index.ids_.push_back(ad_id);
    index.vectors_.insert(index.vectors_.end(), v.begin(), v.end());
  }
  return index;
}

std::vector<ScoredId> RetrievalIndex::query_topk(
    const std::string& query, int k, const EmbeddingProvider& provider) const {
  if (k < 1) throw Error("invalid_argument", "k must be >= 1");
  if (ids_.empty()) return {};
  if (provider.dim() != dim_) {
    throw Error("invalid_argument", "provider dim mismatch");
  }
  const std::vector<double> q = provider.embed(query);
  std::vector<ScoredId> scored(ids_.size());
  for (std::size_t row = 0; row < ids_.size(); ++row) {
    const double* v = vectors_.data() + row * static_cast<std::size_t>(dim_);
    double dot = 0.0;
    for (int d = 0; d < dim_; ++d) dot += q[static_cast<std::size_t>(d)] * v[d];
    scored[row] = {ids_[row], dot};
  }
  const std::size_t take = std::min(static_cast<std::size_t>(k), scored.size());
  auto better = [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ad_id < b.ad_id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(take),
                    scored.end(), better);
  scored.resize(take);
  return scored;
}

void RetrievalIndex::save(const std::string& path) const {
  json j;
  j["format_version"] = 1;
  j["provider_id"] = provider_id_;
  j["dim"] = dim_;
  j["ids"] = ids_;
  j["vectors"] = vectors_;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("store_io", "cannot write " + tmp);
    out << j.dump() << "\n";
    if (!out.flush()) throw Error("store_io", "short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("store_io", "rename failed: " + ec.message());
}

RetrievalIndex RetrievalIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("store_io", "cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("format_version") ||
      j["format_version"].get<int>() != 1 || !j.contains("ids") ||
      !j.contains("vectors") || !j.contains("dim")) {
    throw Error("store_io", "malformed index: " + path);
  }
  RetrievalIndex index;
  index.ids_ = j["ids"].get<std::vector<std::string>>();
  index.vectors_ = j["vectors"].get<std::vector<double>>();
  index.dim_ = j["dim"].get<int>();
  index.provider_id_ = j.value("provider_id", "");
  if (index.vectors_.size() !=
      index.ids_.size() * static_cast<std::size_t>(index.dim_)) {
    throw Error("store_io", "index size mismatch: " + path);
  }
  return index;
}

double relevance_score(const std::string& query, const std::string& summary,
                       const EmbeddingProvider& provider) {
  const std::vector<double> q = provider.embed(query);
  const std::vector<double> s = provider.embed(summary);
  double dot = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * s[i];
  return dot;
}

std::vector<ScoredId> rank_candidates(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    const RelevanceScorer& scorer) {
  std::vector<ScoredId> out;
  out.reserve(candidates.size());
  for (const auto& [ad_id, summary] : candidates) {
    out.push_back({ad_id, scorer(query, summary)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ad_id < b.ad_id;
  });
  return out;
}

std::vector<ScoredId> rank_candidates(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& candidates,
    const EmbeddingProvider& provider) {
  return rank_candidates(query, candidates,
                         [&provider](const std::string& q,
                                     const std::string& s) {
                           return relevance_score(q, s, provider);
                         });
}

namespace {

std::vector<std::string> split_columns(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string col;
  while (in >> col) out.push_back(col);
  return out;
}

}  // namespace

void load_run_file(const std::string& path, EvalRun* run) {
  std::ifstream in(path);
  if (!in) throw Error("store_io", "cannot read " + path);
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::vector<std::pair<int, ScoredId>>> staged;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_columns(line);
    if (cols.size() != 4) {
      throw Error("parse", path + " line " + std::to_string(line_no) +
                               ": expected 4 columns");
    }
    try {
      staged[cols[0]].push_back(
          {std::stoi(cols[2]), {cols[1], std::stod(cols[3])}});
    } catch (const std::exception&) {
      throw Error("parse", path + " line " + std::to_string(line_no) +
                               ": bad rank or score");
    }
  }
  for (auto& [query_id, rows] : staged) {
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& ranking = run->rankings[query_id];
    ranking.clear();
    for (auto& [rank, scored] : rows) ranking.push_back(std::move(scored));
  }
}

void load_qrels_file(const std::string& path, EvalRun* run) {
  std::ifstream in(path);
  if (!in) throw Error("store_io", "cannot read " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_columns(line);
    if (cols.size() != 3 || (cols[2] != "0" && cols[2] != "1")) {
      throw Error("parse", path + " line " + std::to_string(line_no) +
                               ": expected `query ad label{0,1}`");
    }
    run->qrels[cols[0]][cols[1]] = cols[2] == "1" ? 1 : 0;
  }
}

void save_run_file(const std::string& path, const EvalRun& run) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("store_io", "cannot write " + path);
  for (const auto& [query_id, ranking] : run.rankings) {
    int rank = 1;
    for (const ScoredId& scored : ranking) {
      out << query_id << ' ' << scored.ad_id << ' ' << rank << ' '
          << json(scored.score).dump() << "\n";
      ++rank;
    }
  }
  if (!out.flush()) throw Error("store_io", "short write: " + path);
}

double hit_at_k(const EvalRun& run, int k, int* skipped_queries) {
  if (k < 1) throw Error("invalid_argument", "k must be >= 1");
  double total = 0.0;
  int evaluated = 0;
  int skipped = 0;
  for (const auto& [query_id, ranking] : run.rankings) {
    std::set<std::string> positives;
    auto it = run.qrels.find(query_id);
    if (it != run.qrels.end()) {
      for (const auto& [ad_id, label] : it->second) {
        if (label == 1) positives.insert(ad_id);
      }
    }
    if (positives.empty()) {
      ++skipped;
      continue;
    }
    int found = 0;
    const std::size_t take =
        std::min(static_cast<std::size_t>(k), ranking.size());
    for (std::size_t i = 0; i < take; ++i) {
      if (positives.count(ranking[i].ad_id)) ++found;
    }
    total += static_cast<double>(found) / static_cast<double>(positives.size());
    ++evaluated;
  }
  if (skipped_queries != nullptr) *skipped_queries = skipped;
  if (evaluated == 0) return 0.0;
  return total / static_cast<double>(evaluated);
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error("invalid_argument", "scores/labels size mismatch");
  }
  std::size_t positives = 0;
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw Error("invalid_argument", "labels must be 0/1");
    }
    positives += static_cast<std::size_t>(label);
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error("invalid_argument", "roc_auc needs both classes");
  }

  // Average ranks with tie groups; AUC from the positive rank-sum.
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double recall_at_precision(const std::vector<double>& scores,
                           const std::vector<int>& labels, double p) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error("invalid_argument", "scores/labels size mismatch");
  }
  std::size_t positives = 0;
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw Error("invalid_argument", "labels must be 0/1");
    }
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == labels.size()) {
    throw Error("invalid_argument", "recall_at_precision needs both classes");
  }

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double best_recall = 0.0;
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Take whole tie groups: thresholds sit at distinct score values.
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    for (std::size_t k = i; k <= j; ++k) {
      ++predicted;
      if (labels[order[k]] == 1) ++tp;
    }
    const double precision =
        static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall =
        static_cast<double>(tp) / static_cast<double>(positives);
    if (precision >= p) best_recall = std::max(best_recall, recall);
    i = j + 1;
  }
  return best_recall;
}

double diversity_ratio(const RetrievalIndex& index,
                       const std::vector<std::string>& queries, int k,
                       const EmbeddingProvider& provider) {
  if (queries.empty()) throw Error("invalid_argument", "empty query set");
  if (k < 1) throw Error("invalid_argument", "k must be >= 1");
  std::set<std::string> unique;
  for (const std::string& query : queries) {
    for (const ScoredId& scored : index.query_topk(query, k, provider)) {
      unique.insert(scored.ad_id);
    }
  }
  return static_cast<double>(unique.size()) /
         (static_cast<double>(queries.size()) * static_cast<double>(k));
}

std::vector<std::string> make_near_duplicate_queries(
    const std::vector<std::string>& seeds, int variants) {
  std::vector<std::string> out;
  for (const std::string& seed : seeds) {
    out.push_back(seed);
    std::istringstream in(seed);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    for (int v = 0; v < variants; ++v) {
      const std::size_t pos = static_cast<std::size_t>(v) % tokens.size();
      std::vector<std::string> variant = tokens;
      if (v % 2 == 0 || tokens.size() == 1) {
        variant.insert(variant.begin() + static_cast<long>(pos), tokens[pos]);
      } else {
        variant.erase(variant.begin() + static_cast<long>(pos));
      }
      std::string joined;
      for (const auto& t : variant) {
        if (!joined.empty()) joined += ' ';
        joined += t;
      }
      out.push_back(joined);
    }
  }
  return out;
}

double granularity_ratio(const RetrievalIndex& index,
                         const std::vector<std::string>& near_duplicates,
                         int k, const EmbeddingProvider& provider) {
  return diversity_ratio(index, near_duplicates, k, provider);
}

double irrelevant_ratio(const std::vector<QualityLabel>& labels) {
  if (labels.empty()) throw Error("invalid_argument", "empty label list");
  std::size_t bad = 0;
  for (QualityLabel label : labels) {
    if (label == QualityLabel::kBad) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(labels.size());
}

struct SummaryService::Impl {
  const SummaryStore& store;
  const RetrievalIndex& index;
  const EmbeddingProvider& provider;
  httplib::Server server;
  std::thread worker;

  Impl(const SummaryStore& s, const RetrievalIndex& i,
       const EmbeddingProvider& p)
      : store(s), index(i), provider(p) {}
};

SummaryService::SummaryService(const SummaryStore& store,
                               const RetrievalIndex& index,
                               const EmbeddingProvider& provider)
    : impl_(std::make_unique<Impl>(store, index, provider)) {
  impl_->server.Get("/summary/([^/]+)",
                    [this](const httplib::Request& req,
                           httplib::Response& res) {
                      const std::string ad_id = req.matches[1];
                      const auto entry = impl_->store.get(ad_id);
                      json body;
                      if (!entry) {
                        body["error"] = "not_found";
                        res.status = 404;
                      } else {
                        body["ad_id"] = ad_id;
                        body["summary"] = entry->summary;
                        body["version"] = entry->version;
                      }
                      res.set_content(body.dump(), "application/json");
                    });
  impl_->server.Post("/query", [this](const httplib::Request& req,
                                      httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("query") ||
        !body["query"].is_string()) {
      res.status = 400;
      res.set_content(json{{"error", "bad_request"}}.dump(),
                      "application/json");
      return;
    }
    const int k = body.value("k", 10);
    json results = json::array();
    try {
      for (const ScoredId& scored :
           impl_->index.query_topk(body["query"].get<std::string>(), k,
                                   impl_->provider)) {
        results.push_back({{"ad_id", scored.ad_id}, {"score", scored.score}});
      }
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(json{{"error", e.code()}}.dump(), "application/json");
      return;
    }
    res.set_content(json{{"results", results}}.dump(), "application/json");
  });
}

SummaryService::~SummaryService() { stop(); }

int SummaryService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("serve_bind", host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw Error("serve_bind", host + ":" + std::to_string(port));
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void SummaryService::wait() {
  if (impl_->worker.joinable()) impl_->worker.join();
}

void SummaryService::stop() {
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace admix
