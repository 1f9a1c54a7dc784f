#ifndef ADMIX_TEXTMETRICS_HPP_
#define ADMIX_TEXTMETRICS_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace admix {

enum class Tokenizer { kUnicodeWord, kCjkChar, kWhitespace };

const char* tokenizer_name(Tokenizer t);
Tokenizer tokenizer_from_name(std::string_view name);

struct TokenSeq {
  std::vector<std::string> tokens;
  Tokenizer tokenizer_id = Tokenizer::kWhitespace;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Tokenization modes:
//   kWhitespace   split on runs of whitespace
//   kUnicodeWord  word-character runs become tokens, every CJK codepoint is
//                 its own token, punctuation separates
//   kCjkChar      every non-whitespace codepoint is its own token
// Empty text yields an empty TokenSeq; no token is ever the empty string.
TokenSeq tokenize(std::string_view text, Tokenizer mode);

// Space-join. Re-tokenizing the result is idempotent in whitespace mode.
std::string detokenize(const TokenSeq& seq);

using NGram = std::vector<std::string>;

struct NGramProfile {
  int n = 1;
  std::map<NGram, int> counts;

  int total() const;
};

NGramProfile ngram_profile(const std::vector<std::string>& tokens, int n);

// Per-order IDF over a reference corpus: idf(g) = ln(corpus_size / max(1, df(g))).
// Grams never seen in the corpus get df = 0, i.e. idf = ln(corpus_size).
struct IdfTable {
  int max_n = 0;
  std::size_t corpus_size = 0;
  std::vector<std::map<NGram, double>> idf_by_order;  // index n-1

  double idf(int n, const NGram& gram) const;
};

IdfTable idf_from_corpus(const std::vector<std::vector<TokenSeq>>& ref_sets,
                         int max_n);

enum class BleuSmoothing { kNone, kAddOneHighOrder };

// Clipped modified n-gram precision BLEU with brevity penalty
// exp(min(0, 1 - r/c)); r is the closest reference length (ties -> shorter).
// kAddOneHighOrder adds one to numerator and denominator for orders >= 2
// whose raw match count is zero. Empty hypothesis scores 0.
double bleu(const TokenSeq& hyp, const std::vector<TokenSeq>& refs,
            int max_n = 4,
            BleuSmoothing smoothing = BleuSmoothing::kAddOneHighOrder);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

RougeScore rouge_n(const TokenSeq& hyp, const TokenSeq& ref, int n);

RougeScore rouge_l(const TokenSeq& hyp, const TokenSeq& ref);

struct CiderResult {
  std::vector<double> per_item;
  double mean = 0.0;
};

// TF-IDF n-gram cosine consensus, averaged over references then over orders
// 1..max_n, scaled by 10. IDF comes from ref_sets via idf_from_corpus, so at
// least two items are required.
CiderResult cider(const std::vector<TokenSeq>& hyps,
                  const std::vector<std::vector<TokenSeq>>& ref_sets,
                  int max_n = 4);

}  // namespace admix

#endif  // ADMIX_TEXTMETRICS_HPP_
