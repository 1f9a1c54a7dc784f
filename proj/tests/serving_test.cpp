#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "admix/error.hpp"
#include "admix/serving.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"

using namespace admix;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("admix_serving_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, std::string>> demo_docs() {
  return {
      {"ad-01", "acme running shoes summer sale"},
      {"ad-02", "blue denim jacket new arrival"},
      {"ad-03", "夏季连衣裙 显瘦 轻薄"},
      {"ad-04", "wireless charger fast charging"},
      {"ad-05", "acme trail running shoes waterproof"},
  };
}

}  // namespace

TEST_CASE("store put/get tracks versions and logical time") {
  SummaryStore store;
  CHECK(store.size() == 0);
  CHECK(!store.get("ad-1").has_value());
  CHECK(store.put("ad-1", "first") == 1);
  CHECK(store.put("ad-2", "other") == 1);
  CHECK(store.put("ad-1", "second") == 2);
  const auto e1 = store.get("ad-1");
  const auto e2 = store.get("ad-2");
  REQUIRE(e1.has_value());
  REQUIRE(e2.has_value());
  CHECK(e1->summary == "second");
  CHECK(e1->version == 2);
  CHECK(e2->version == 1);
  CHECK(e1->updated_at > e2->updated_at);  // later op, later logical stamp
  CHECK(store.size() == 2);
}

TEST_CASE("snapshots round-trip and are byte-stable") {
  TempDir tmp;
  SummaryStore store;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 64; ++i) {
    store.put("ad-" + std::to_string(rng() % 40), "summary v" +
                                                      std::to_string(i));
  }
  store.save_snapshot(tmp.file("a.snap"));
  const SummaryStore loaded = SummaryStore::load_snapshot(tmp.file("a.snap"));
  CHECK(loaded.entries_sorted() == store.entries_sorted());

  loaded.save_snapshot(tmp.file("b.snap"));
  CHECK(read_file(tmp.file("a.snap")) == read_file(tmp.file("b.snap")));

  // Logical clock survives the round trip: the next op sorts after all.
  SummaryStore mutated = SummaryStore::load_snapshot(tmp.file("a.snap"));
  mutated.put("zzz", "new");
  const auto entries = mutated.entries_sorted();
  std::int64_t max_existing = 0;
  for (const auto& [id, entry] : entries) {
    if (id != "zzz") max_existing = std::max(max_existing, entry.updated_at);
  }
  CHECK(mutated.get("zzz")->updated_at > max_existing);
}

TEST_CASE("snapshot loading rejects corrupt files") {
  TempDir tmp;
  CHECK_THROWS_AS(SummaryStore::load_snapshot(tmp.file("missing.snap")),
                  Error);
  {
    std::ofstream out(tmp.file("corrupt.snap"), std::ios::binary);
    out << "\x05\x00\x00\x00{\"x\"";
  }
  CHECK_THROWS_AS(SummaryStore::load_snapshot(tmp.file("corrupt.snap")),
                  Error);
}

TEST_CASE("hashed embedder matches the standalone oracle") {
  const HashedNgramEmbedder embedder(256);
  CHECK(embedder.dim() == 256);
  const std::vector<std::string> texts = {
      "",
      "ab",
      "abc",
      "acme running shoes",
      "夏季连衣裙 显瘦",
      "mixed 促销 text with spaces",
  };
  for (const auto& text : texts) {
    CAPTURE(text);
    const auto got = embedder.embed(text);
    const auto want = oracle::embed(text, 256);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
    double norm = 0.0;
    for (double v : got) norm += v * v;
    if (text.empty()) {
      CHECK(norm == 0.0);
    } else {
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("query_topk matches a naive cosine scan with ad_id tie-breaks") {
  const HashedNgramEmbedder embedder(128);
  std::vector<std::pair<std::string, std::string>> docs;
  std::mt19937_64 rng(17);
  const std::vector<std::string> words = {"shoe", "hat",  "tea",  "促销",
                                          "夏季", "jack", "fast", "blue"};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    const int len = 2 + static_cast<int>(rng() % 6);
    for (int w = 0; w < len; ++w) {
      if (w) text += ' ';
      text += words[rng() % words.size()];
    }
    char id[16];
    std::snprintf(id, sizeof(id), "ad-%03d", i);
    docs.emplace_back(id, text);
  }
  const RetrievalIndex index = RetrievalIndex::build(docs, embedder);
  REQUIRE(index.size() == docs.size());

  for (int q = 0; q < 20; ++q) {
    std::string query;
    const int len = 1 + static_cast<int>(rng() % 4);
    for (int w = 0; w < len; ++w) {
      if (w) query += ' ';
      query += words[rng() % words.size()];
    }
    for (int k : {1, 5, 17}) {
      const auto got = index.query_topk(query, k, embedder);
      // Naive scan against the oracle embedding. Rows get the same second
      // normalization the index applies at insert so exact ties line up.
      const auto qv = oracle::embed(query, 128);
      std::vector<ScoredId> want;
      for (const auto& [id, text] : docs) {
        auto dv = oracle::embed(text, 128);
        double norm = 0.0;
        for (double x : dv) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
          for (double& x : dv) x /= norm;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < dv.size(); ++i) dot += qv[i] * dv[i];
        want.push_back({id, dot});
      }
      std::sort(want.begin(), want.end(),
                [](const ScoredId& a, const ScoredId& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.ad_id < b.ad_id;
                });
      want.resize(std::min<std::size_t>(k, want.size()));
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].ad_id == want[i].ad_id);
        CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("index save/load preserves query results") {
  TempDir tmp;
  const HashedNgramEmbedder embedder(64);
  const RetrievalIndex index = RetrievalIndex::build(demo_docs(), embedder);
  index.save(tmp.file("index.json"));
  const RetrievalIndex loaded = RetrievalIndex::load(tmp.file("index.json"));
  CHECK(loaded.size() == index.size());
  CHECK(loaded.dim() == index.dim());
  const auto a = index.query_topk("acme shoes", 3, embedder);
  const auto b = loaded.query_topk("acme shoes", 3, embedder);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ad_id == b[i].ad_id);
    CHECK(a[i].score == b[i].score);
  }
  CHECK_THROWS_AS(RetrievalIndex::load(tmp.file("nope.json")), Error);
}

TEST_CASE("relevance scoring ranks exact matches first") {
  const HashedNgramEmbedder embedder(128);
  const auto ranked = rank_candidates("acme running shoes", demo_docs(),
                                      embedder);
  REQUIRE(!ranked.empty());
  CHECK(ranked[0].ad_id == "ad-01");
  CHECK(ranked[0].score > ranked.back().score);
  // Custom scorer overload agrees with the provider overload.
  const auto custom = rank_candidates(
      "acme running shoes", demo_docs(),
      [&](const std::string& q, const std::string& s) {
        return relevance_score(q, s, embedder);
      });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(custom[i].ad_id == ranked[i].ad_id);
  }
}

TEST_CASE("roc_auc fixture and oracle equivalence") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) ==
        doctest::Approx(0.75).epsilon(1e-12));
  // Ties: one positive and one negative sharing a score contribute 0.5.
  CHECK(roc_auc({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(23);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> scores;
    std::vector<int> labels;
    const int n = 10 + static_cast<int>(rng() % 40);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng() % 20) / 19.0);
      labels.push_back(static_cast<int>(rng() % 2));
      pos += labels.back();
    }
    if (pos == 0 || pos == n) continue;
    CHECK(roc_auc(scores, labels) ==
          doctest::Approx(oracle::auc_pairwise(scores, labels)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), Error);  // needs both classes
}

TEST_CASE("recall_at_precision sweeps thresholds over tie groups") {
  const std::vector<double> scores = {0.9, 0.8, 0.7, 0.6, 0.5};
  const std::vector<int> labels = {1, 1, 0, 1, 0};
  CHECK(recall_at_precision(scores, labels, 0.90) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(recall_at_precision(scores, labels, 0.75) ==
        doctest::Approx(1.0).epsilon(1e-12));  // t=0.6: P=3/4, R=1
  CHECK(recall_at_precision({0.9, 0.1}, {0, 1}, 0.9) == 0.0);
  // Tied scores move as a block: the mixed tie group fails p=1.0.
  CHECK(recall_at_precision({0.7, 0.7, 0.2}, {1, 0, 0}, 1.0) == 0.0);
}

TEST_CASE("hit_at_k averages per-query recall and skips unlabeled queries") {
  EvalRun run;
  run.rankings["q1"] = {{"a", 0.9}, {"b", 0.8}, {"c", 0.7}};
  run.qrels["q1"] = {{"a", 1}, {"c", 1}};  // top-2 catches a only
  run.rankings["q2"] = {{"d", 0.9}, {"e", 0.8}};
  run.qrels["q2"] = {{"d", 1}};
  run.rankings["q3"] = {{"f", 0.9}};
  run.qrels["q3"] = {{"f", 0}};  // no positives -> skipped
  int skipped = 0;
  CHECK(hit_at_k(run, 2, &skipped) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(skipped == 1);
  CHECK(hit_at_k(run, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("run and qrels files round-trip") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("run.txt"));
    out << "q2 ad-b 2 0.25\n";     // ranks out of order on purpose
    out << "q1 ad-a 1 0.875\n";
    out << "q2 ad-a 1 0.5\n";
  }
  {
    std::ofstream out(tmp.file("qrels.txt"));
    out << "q1 ad-a 1\n";
    out << "q2 ad-a 0\n";
    out << "q2 ad-b 1\n";
  }
  EvalRun run;
  load_run_file(tmp.file("run.txt"), &run);
  load_qrels_file(tmp.file("qrels.txt"), &run);
  REQUIRE(run.rankings.at("q2").size() == 2);
  CHECK(run.rankings.at("q2")[0].ad_id == "ad-a");  // sorted by rank column
  CHECK(run.rankings.at("q2")[1].ad_id == "ad-b");
  CHECK(run.qrels.at("q2").at("ad-b") == 1);

  save_run_file(tmp.file("saved.txt"), run);
  EvalRun reloaded;
  load_run_file(tmp.file("saved.txt"), &reloaded);
  CHECK(reloaded.rankings.size() == run.rankings.size());
  for (const auto& [qid, ranking] : run.rankings) {
    const auto& other = reloaded.rankings.at(qid);
    REQUIRE(other.size() == ranking.size());
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      CHECK(other[i].ad_id == ranking[i].ad_id);
      CHECK(other[i].score == ranking[i].score);  // exact round trip
    }
  }

  {
    std::ofstream out(tmp.file("bad.txt"));
    out << "q1 ad-a not-a-rank 0.5\n";
  }
  EvalRun bad;
  CHECK_THROWS_AS(load_run_file(tmp.file("bad.txt"), &bad), Error);
}

TEST_CASE("diversity and granularity ratios") {
  const HashedNgramEmbedder embedder(128);
  const RetrievalIndex index = RetrievalIndex::build(demo_docs(), embedder);

  // Identical queries retrieve identical sets: |union| = k.
  const std::vector<std::string> same = {"acme shoes", "acme shoes",
                                         "acme shoes"};
  CHECK(diversity_ratio(index, same, 2, embedder) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Divergent queries can reach full diversity.
  const std::vector<std::string> mixed = {"acme running shoes",
                                          "wireless charger"};
  CHECK(diversity_ratio(index, mixed, 2, embedder) > 0.5);

  const auto dups = make_near_duplicate_queries({"acme running shoes"}, 2);
  CHECK(dups.size() == 3);
  CHECK(dups[0] == "acme running shoes");
  for (std::size_t i = 1; i < dups.size(); ++i) {
    CHECK(dups[i] != dups[0]);
  }
  const double gran = granularity_ratio(index, dups, 2, embedder);
  CHECK(gran > 0.0);
  CHECK(gran <= 1.0);
  // Near-duplicates retrieve mostly the same documents: granularity stays
  // well below full diversity.
  CHECK(gran < 1.0);
}

TEST_CASE("irrelevant_ratio counts bad labels") {
  std::vector<QualityLabel> labels(7, QualityLabel::kGood);
  labels[1] = labels[3] = labels[5] = QualityLabel::kBad;
  CHECK(irrelevant_ratio(labels) == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
  CHECK_THROWS_AS(irrelevant_ratio({}), Error);
}

TEST_CASE("http service serves summaries and rankings") {
  SummaryStore store;
  for (const auto& [id, text] : demo_docs()) store.put(id, text);
  const HashedNgramEmbedder embedder(128);
  const RetrievalIndex index = RetrievalIndex::build(store, embedder);
  SummaryService service(store, index, embedder);
  const int port = service.start("127.0.0.1", 0);
  REQUIRE(port > 0);

  httplib::Client client("127.0.0.1", port);
  auto got = client.Get("/summary/ad-02");
  REQUIRE(got);
  CHECK(got->status == 200);
  const json body = json::parse(got->body);
  CHECK(body["summary"] == "blue denim jacket new arrival");
  CHECK(body["version"] == 1);

  auto missing = client.Get("/summary/ad-99");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto ranked = client.Post("/query", json{{"query", "acme shoes"}, {"k", 3}}.dump(),
                            "application/json");
  REQUIRE(ranked);
  CHECK(ranked->status == 200);
  const json results = json::parse(ranked->body)["results"];
  REQUIRE(results.size() == 3);
  const auto want = index.query_topk("acme shoes", 3, embedder);
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(results[i]["ad_id"] == want[i].ad_id);
  }

  auto bad = client.Post("/query", "{\"k\": 3}", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  service.stop();
}
