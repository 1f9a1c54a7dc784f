#include "admix/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

#include "admix/error.hpp"

namespace admix {

namespace {

const char* kWords[] = {
    "apple",  "brick",  "cloud",  "dance",  "eagle",  "frost",  "grape",
    "house",  "ivory",  "jolly",  "knife",  "lemon",  "mango",  "night",
    "ocean",  "piano",  "queen",  "river",  "stone",  "tiger",  "urban",
    "vivid",  "wheat",  "xenon",  "yacht",  "zebra",  "amber",  "blaze",
    "coral",  "dusky",  "ember",  "flame",  "glide",  "harbor", "island",
    "jungle", "kayak",  "lunar",  "meadow", "nectar",
};
constexpr int kWordCount = static_cast<int>(sizeof(kWords) / sizeof(kWords[0]));

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL + b;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  return x;
}

template <typename T>
void shuffle_stable(std::vector<T>* v, std::mt19937_64* rng) {
  for (std::size_t i = v->size(); i > 1; --i) {
    const std::size_t j = (*rng)() % i;
    std::swap((*v)[i - 1], (*v)[j]);
  }
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

struct RecordDraw {
  std::vector<std::string> chosen;  // distinct keywords, draw order
  std::vector<std::string> stream;  // noisy shuffled stream
  std::vector<std::string> reference;  // stream deduped in first-seen order
  bool sparse = false;
};

RecordDraw draw_record(const SyntheticConfig& cfg,
                       const std::vector<std::string>& vocab, int i) {
  std::mt19937_64 rng(mix(cfg.seed, static_cast<std::uint64_t>(i) + 1));
  RecordDraw draw;

  const int span = cfg.max_keywords - cfg.min_keywords + 1;
  const int m = cfg.min_keywords + static_cast<int>(rng() % span);
  std::vector<std::size_t> indices(vocab.size());
  for (std::size_t k = 0; k < indices.size(); ++k) indices[k] = k;
  shuffle_stable(&indices, &rng);
  for (int k = 0; k < m; ++k) draw.chosen.push_back(vocab[indices[k]]);

  draw.stream = draw.chosen;
  for (int extra = 0; extra < cfg.noise_repeats * m; ++extra) {
    draw.stream.push_back(draw.chosen[rng() % draw.chosen.size()]);
  }
  shuffle_stable(&draw.stream, &rng);

  std::vector<std::string> seen;
  for (const auto& tok : draw.stream) {
    if (std::find(seen.begin(), seen.end(), tok) == seen.end()) {
      seen.push_back(tok);
    }
  }
  draw.reference = seen;

  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  draw.sparse = u < cfg.sparse_fraction;
  return draw;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (records < 0) throw Error("invalid_config", "records must be >= 0");
  if (keyword_vocab < 1 || keyword_vocab > kWordCount) {
    throw Error("invalid_config",
                "keyword_vocab must be in [1," + std::to_string(kWordCount) +
                    "]");
  }
  if (min_keywords < 1 || max_keywords < min_keywords ||
      max_keywords > keyword_vocab) {
    throw Error("invalid_config", "bad keyword range");
  }
  if (noise_repeats < 0) {
    throw Error("invalid_config", "noise_repeats must be >= 0");
  }
  if (sparse_fraction < 0.0 || sparse_fraction > 1.0) {
    throw Error("invalid_config", "sparse_fraction must be in [0,1]");
  }
}

std::vector<std::string> keyword_vocab(int n) {
  if (n < 1 || n > kWordCount) {
    throw Error("invalid_argument", "keyword_vocab size out of range");
  }
  return {kWords, kWords + n};
}

RlTask make_rl_task(const SyntheticConfig& cfg) {
  cfg.validate();
  RlTask task;
  task.policy_vocab.push_back(kBosToken);
  task.policy_vocab.push_back(kEosToken);
  const std::vector<std::string> vocab = keyword_vocab(cfg.keyword_vocab);
  task.policy_vocab.insert(task.policy_vocab.end(), vocab.begin(),
                           vocab.end());
  for (int i = 0; i < cfg.records; ++i) {
    const RecordDraw draw = draw_record(cfg, vocab, i);
    TrainExample example;
    example.prompt = draw.stream;
    example.reference = join(draw.reference);
    task.examples.push_back(std::move(example));
  }
  return task;
}

SyntheticData make_synthetic_records(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticData data;
  const std::vector<std::string> vocab = keyword_vocab(cfg.keyword_vocab);
  for (int i = 0; i < cfg.records; ++i) {
    const RecordDraw draw = draw_record(cfg, vocab, i);
    std::mt19937_64 rng(mix(cfg.seed ^ 0x5ca1ab1eULL,
                            static_cast<std::uint64_t>(i) + 1));

    AdRecord record;
    char id[16];
    std::snprintf(id, sizeof(id), "ad-%06d", i);
    record.ad_id = id;
    record.visual_surrogate = join(draw.chosen);
    if (draw.sparse) {
      record.ocr = rng() % 2 == 0 ? "sale" : "";
      record.metadata["density"] = "sparse";
    } else {
      std::string brand = draw.chosen[0];
      brand[0] = static_cast<char>(
          std::toupper(static_cast<unsigned char>(brand[0])));
      record.asr = join(draw.stream);
      record.ocr = "Brand: " + brand + " | Subject: " +
                   draw.chosen[draw.chosen.size() > 1 ? 1 : 0];
      record.metadata["density"] = "rich";
    }
    data.references[record.ad_id] = join(draw.reference);

    // One positive in-record query; every third record also gets an
    // off-record negative.
    RelevanceSample positive;
    positive.ad_id = record.ad_id;
    positive.label = 1;
    positive.query = draw.chosen.size() > 1
                         ? draw.chosen[0] + " " + draw.chosen[1]
                         : draw.chosen[0];
    data.relevance.push_back(positive);
    if (i % 3 == 0) {
      std::vector<std::string> outside;
      for (const auto& word : vocab) {
        if (std::find(draw.chosen.begin(), draw.chosen.end(), word) ==
            draw.chosen.end()) {
          outside.push_back(word);
        }
      }
      if (outside.size() >= 2) {
        RelevanceSample negative;
        negative.ad_id = record.ad_id;
        negative.label = 0;
        negative.query = outside[rng() % outside.size()] + " " +
                         outside[rng() % outside.size()];
        data.relevance.push_back(negative);
      }
    }
    data.records.push_back(std::move(record));
  }
  return data;
}

std::vector<std::pair<std::string, std::string>> make_corpus(
    int docs, std::uint64_t seed) {
  if (docs < 0) throw Error("invalid_argument", "docs must be >= 0");
  std::vector<std::string> vocab;
  for (char a = 'a'; a <= 'z'; ++a) {
    for (char b = 'a'; b <= 'h'; ++b) {
      vocab.push_back(std::string("t") + a + b);
    }
  }
  std::vector<std::pair<std::string, std::string>> corpus;
  corpus.reserve(static_cast<std::size_t>(docs));
  for (int i = 0; i < docs; ++i) {
    std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(i) + 1));
    const int len = 5 + static_cast<int>(rng() % 8);
    std::vector<std::string> tokens;
    for (int k = 0; k < len; ++k) {
      tokens.push_back(vocab[rng() % vocab.size()]);
    }
    char id[16];
    std::snprintf(id, sizeof(id), "doc-%05d", i);
    corpus.emplace_back(id, join(tokens));
  }
  return corpus;
}

std::vector<std::string> make_corpus_queries(
    const std::vector<std::pair<std::string, std::string>>& corpus, int count,
    std::uint64_t seed) {
  if (corpus.empty()) throw Error("invalid_argument", "empty corpus");
  std::vector<std::string> queries;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix(seed ^ 0x9e57ULL, static_cast<std::uint64_t>(i) + 1));
    const std::string& text = corpus[rng() % corpus.size()].second;
    std::vector<std::string> tokens;
    std::string tok;
    for (char c : text) {
      if (c == ' ') {
        if (!tok.empty()) tokens.push_back(tok);
        tok.clear();
      } else {
        tok += c;
      }
    }
    if (!tok.empty()) tokens.push_back(tok);
    const std::size_t span = 1 + rng() % std::min<std::size_t>(4, tokens.size());
    const std::size_t start = rng() % (tokens.size() - span + 1);
    std::vector<std::string> picked(tokens.begin() + static_cast<long>(start),
                                    tokens.begin() +
                                        static_cast<long>(start + span));
    if (rng() % 3 == 0) {
      picked.push_back("t" + std::string(1, static_cast<char>('a' + rng() % 26)));
    }
    queries.push_back(join(picked));
  }
  return queries;
}

}  // namespace admix
