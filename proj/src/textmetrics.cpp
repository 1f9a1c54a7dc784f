#include "admix/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "admix/error.hpp"
#include "admix/utf8.hpp"

namespace admix {

namespace {

bool is_word_char(std::uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9') || cp == '_';
  }
  if (is_cjk(cp) || is_unicode_space(cp)) return false;
  // Non-ASCII punctuation blocks separate words like ASCII punctuation does.
  if (cp >= 0x2000 && cp <= 0x206F) return false;   // general punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return false;   // CJK punctuation
  if (cp >= 0xFF01 && cp <= 0xFF0F) return false;   // fullwidth punctuation
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp >= 0xFF3B && cp <= 0xFF40) return false;
  if (cp >= 0xFF5B && cp <= 0xFF65) return false;
  return true;  // accented letters and other letter-like codepoints
}

}  // namespace

const char* tokenizer_name(Tokenizer t) {
  switch (t) {
    case Tokenizer::kUnicodeWord: return "unicode_word";
    case Tokenizer::kCjkChar: return "cjk_char";
    case Tokenizer::kWhitespace: return "whitespace";
  }
  return "unicode_word";
}

Tokenizer tokenizer_from_name(std::string_view name) {
  if (name == "unicode_word") return Tokenizer::kUnicodeWord;
  if (name == "cjk_char") return Tokenizer::kCjkChar;
  if (name == "whitespace") return Tokenizer::kWhitespace;
  throw Error("invalid_argument", "unknown tokenizer: " + std::string(name));
}

TokenSeq tokenize(std::string_view text, Tokenizer mode) {
  TokenSeq out;
  out.tokenizer_id = mode;
  if (text.empty()) return out;

  if (mode == Tokenizer::kWhitespace) {
    std::string current;
    auto flush = [&] {
      if (!current.empty()) {
        out.tokens.push_back(current);
        current.clear();
      }
    };
    for (std::uint32_t cp : utf8_codepoints(text)) {
      if (is_unicode_space(cp)) {
        flush();
      } else {
        current += utf8_encode(cp);
      }
    }
    flush();
    return out;
  }

  if (mode == Tokenizer::kCjkChar) {
    for (std::uint32_t cp : utf8_codepoints(text)) {
      if (!is_unicode_space(cp)) out.tokens.push_back(utf8_encode(cp));
    }
    return out;
  }

  // kUnicodeWord
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.tokens.push_back(word);
      word.clear();
    }
  };
  for (std::uint32_t cp : utf8_codepoints(text)) {
    if (is_cjk(cp)) {
      flush();
      out.tokens.push_back(utf8_encode(cp));
    } else if (is_word_char(cp)) {
      word += utf8_encode(cp);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += seq.tokens[i];
  }
  return out;
}

int NGramProfile::total() const {
  int t = 0;
  for (const auto& [gram, count] : counts) t += count;
  return t;
}

NGramProfile ngram_profile(const std::vector<std::string>& tokens, int n) {
  if (n < 1) throw Error("invalid_argument", "ngram order must be >= 1");
  NGramProfile profile;
  profile.n = n;
  if (tokens.size() < static_cast<std::size_t>(n)) return profile;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    NGram gram(tokens.begin() + i, tokens.begin() + i + n);
    ++profile.counts[gram];
  }
  return profile;
}

double IdfTable::idf(int n, const NGram& gram) const {
  if (n < 1 || n > max_n) {
    throw Error("invalid_argument", "idf order out of range");
  }
  const auto& table = idf_by_order[static_cast<std::size_t>(n) - 1];
  auto it = table.find(gram);
  if (it != table.end()) return it->second;
  return std::log(static_cast<double>(corpus_size));
}

IdfTable idf_from_corpus(const std::vector<std::vector<TokenSeq>>& ref_sets,
                         int max_n) {
  if (ref_sets.empty()) {
    throw Error("invalid_argument", "idf corpus must be non-empty");
  }
  if (max_n < 1) throw Error("invalid_argument", "max_n must be >= 1");

  IdfTable table;
  table.max_n = max_n;
  table.corpus_size = ref_sets.size();
  table.idf_by_order.resize(static_cast<std::size_t>(max_n));

  std::vector<std::map<NGram, int>> df(static_cast<std::size_t>(max_n));
  for (const auto& refs : ref_sets) {
    for (int n = 1; n <= max_n; ++n) {
      std::map<NGram, int>& order_df = df[static_cast<std::size_t>(n) - 1];
      std::map<NGram, bool> seen;
      for (const TokenSeq& ref : refs) {
        for (const auto& [gram, count] : ngram_profile(ref.tokens, n).counts) {
          seen[gram] = true;
        }
      }
      for (const auto& [gram, present] : seen) ++order_df[gram];
    }
  }

  const double corpus = static_cast<double>(table.corpus_size);
  for (int n = 1; n <= max_n; ++n) {
    for (const auto& [gram, count] : df[static_cast<std::size_t>(n) - 1]) {
      table.idf_by_order[static_cast<std::size_t>(n) - 1][gram] =
          std::log(corpus / static_cast<double>(std::max(1, count)));
    }
  }
  return table;
}

double bleu(const TokenSeq& hyp, const std::vector<TokenSeq>& refs, int max_n,
            BleuSmoothing smoothing) {
  if (max_n < 1) throw Error("invalid_argument", "bleu max_n must be >= 1");
  if (refs.empty()) throw Error("invalid_argument", "bleu needs a reference");

  const std::size_t c = hyp.tokens.size();
  if (c == 0) return 0.0;

  // Effective reference length: closest to c, ties broken toward shorter.
  std::size_t r = refs.front().tokens.size();
  for (const TokenSeq& ref : refs) {
    const std::size_t len = ref.tokens.size();
    const auto dist = [&](std::size_t l) {
      return l > c ? l - c : c - l;
    };
    if (dist(len) < dist(r) || (dist(len) == dist(r) && len < r)) r = len;
  }

  double log_precision_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const NGramProfile hyp_profile = ngram_profile(hyp.tokens, n);
    std::vector<NGramProfile> ref_profiles;
    ref_profiles.reserve(refs.size());
    for (const TokenSeq& ref : refs) {
      ref_profiles.push_back(ngram_profile(ref.tokens, n));
    }
    long long matched = 0;
    for (const auto& [gram, hyp_count] : hyp_profile.counts) {
      int best_ref_count = 0;
      for (const NGramProfile& ref_profile : ref_profiles) {
        auto it = ref_profile.counts.find(gram);
        if (it != ref_profile.counts.end()) {
          best_ref_count = std::max(best_ref_count, it->second);
        }
      }
      matched += std::min(hyp_count, best_ref_count);
    }
    const long long total =
        c >= static_cast<std::size_t>(n)
            ? static_cast<long long>(c) - n + 1
            : 0;

    double num = static_cast<double>(matched);
    double den = static_cast<double>(total);
    if (smoothing == BleuSmoothing::kAddOneHighOrder && n >= 2 &&
        matched == 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_precision_sum += std::log(num / den);
  }

  const double cd = static_cast<double>(c);
  const double rd = static_cast<double>(r);
  const double brevity = c < r ? std::exp(1.0 - rd / cd) : 1.0;
  return brevity * std::exp(log_precision_sum / max_n);
}

RougeScore rouge_n(const TokenSeq& hyp, const TokenSeq& ref, int n) {
  if (n < 1) throw Error("invalid_argument", "rouge_n order must be >= 1");
  const NGramProfile hyp_profile = ngram_profile(hyp.tokens, n);
  const NGramProfile ref_profile = ngram_profile(ref.tokens, n);

  long long overlap = 0;
  for (const auto& [gram, hyp_count] : hyp_profile.counts) {
    auto it = ref_profile.counts.find(gram);
    if (it != ref_profile.counts.end()) {
      overlap += std::min(hyp_count, it->second);
    }
  }

  RougeScore score;
  const int hyp_total = hyp_profile.total();
  const int ref_total = ref_profile.total();
  if (hyp_total > 0) score.precision = static_cast<double>(overlap) / hyp_total;
  if (ref_total > 0) score.recall = static_cast<double>(overlap) / ref_total;
  if (score.precision + score.recall > 0.0) {
    score.f1 = 2.0 * score.precision * score.recall /
               (score.precision + score.recall);
  }
  return score;
}

RougeScore rouge_l(const TokenSeq& hyp, const TokenSeq& ref) {
  const std::size_t h = hyp.tokens.size();
  const std::size_t r = ref.tokens.size();
  RougeScore score;
  if (h == 0 || r == 0) return score;

  std::vector<std::size_t> prev(r + 1, 0);
  std::vector<std::size_t> row(r + 1, 0);
  for (std::size_t i = 1; i <= h; ++i) {
    for (std::size_t j = 1; j <= r; ++j) {
      if (hyp.tokens[i - 1] == ref.tokens[j - 1]) {
        row[j] = prev[j - 1] + 1;
      } else {
        row[j] = std::max(prev[j], row[j - 1]);
      }
    }
    std::swap(prev, row);
  }
  const double lcs = static_cast<double>(prev[r]);
  score.precision = lcs / static_cast<double>(h);
  score.recall = lcs / static_cast<double>(r);
  if (score.precision + score.recall > 0.0) {
    score.f1 = 2.0 * score.precision * score.recall /
               (score.precision + score.recall);
  }
  return score;
}

namespace {

struct TfIdfVector {
  // one map per order, values are count * idf
  std::vector<std::map<NGram, double>> by_order;
  std::vector<double> norms;
};

TfIdfVector tfidf_vector(const std::vector<std::string>& tokens, int max_n,
                         const IdfTable& idf) {
  TfIdfVector v;
  v.by_order.resize(static_cast<std::size_t>(max_n));
  v.norms.assign(static_cast<std::size_t>(max_n), 0.0);
  for (int n = 1; n <= max_n; ++n) {
    auto& slot = v.by_order[static_cast<std::size_t>(n) - 1];
    for (const auto& [gram, count] : ngram_profile(tokens, n).counts) {
      slot[gram] = static_cast<double>(count) * idf.idf(n, gram);
    }
    double sq = 0.0;
    for (const auto& [gram, weight] : slot) sq += weight * weight;
    v.norms[static_cast<std::size_t>(n) - 1] = std::sqrt(sq);
  }
  return v;
}

double cosine_per_order(const TfIdfVector& a, const TfIdfVector& b, int n) {
  const auto& av = a.by_order[static_cast<std::size_t>(n) - 1];
  const auto& bv = b.by_order[static_cast<std::size_t>(n) - 1];
  const double na = a.norms[static_cast<std::size_t>(n) - 1];
  const double nb = b.norms[static_cast<std::size_t>(n) - 1];
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [gram, weight] : av) {
    auto it = bv.find(gram);
    if (it != bv.end()) dot += weight * it->second;
  }
  return dot / (na * nb);
}

}  // namespace

CiderResult cider(const std::vector<TokenSeq>& hyps,
                  const std::vector<std::vector<TokenSeq>>& ref_sets,
                  int max_n) {
  if (max_n < 1) throw Error("invalid_argument", "cider max_n must be >= 1");
  if (hyps.size() != ref_sets.size()) {
    throw Error("invalid_argument", "cider needs parallel hyps and ref_sets");
  }
  if (ref_sets.size() < 2) {
    throw Error("invalid_argument",
                "cider needs corpus_size >= 2 (IDF is degenerate otherwise)");
  }

  const IdfTable idf = idf_from_corpus(ref_sets, max_n);

  CiderResult result;
  result.per_item.reserve(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const TfIdfVector hyp_vec = tfidf_vector(hyps[i].tokens, max_n, idf);
    std::vector<TfIdfVector> ref_vecs;
    ref_vecs.reserve(ref_sets[i].size());
    for (const TokenSeq& ref : ref_sets[i]) {
      ref_vecs.push_back(tfidf_vector(ref.tokens, max_n, idf));
    }
    double order_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
      double ref_sum = 0.0;
      for (const TfIdfVector& ref_vec : ref_vecs) {
        ref_sum += cosine_per_order(hyp_vec, ref_vec, n);
      }
      order_sum += ref_sum / static_cast<double>(ref_sets[i].size());
    }
    result.per_item.push_back(10.0 * order_sum / static_cast<double>(max_n));
  }
  result.mean = std::accumulate(result.per_item.begin(), result.per_item.end(),
                                0.0) /
                static_cast<double>(result.per_item.size());
  return result;
}

}  // namespace admix
