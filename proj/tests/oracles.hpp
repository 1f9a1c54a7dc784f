#ifndef ADMIX_TESTS_ORACLES_HPP_
#define ADMIX_TESTS_ORACLES_HPP_

// Brute-force reference implementations, kept deliberately naive and
// independent of the library internals. Tests treat these as ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

// n-grams as joined strings with an unlikely separator.
inline std::vector<std::string> grams(const Tokens& t, int n) {
  std::vector<std::string> out;
  if (n < 1 || t.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::string g;
    for (int k = 0; k < n; ++k) {
      if (k) g += '\x1f';
      g += t[i + k];
    }
    out.push_back(g);
  }
  return out;
}

inline std::map<std::string, int> gram_counts(const Tokens& t, int n) {
  std::map<std::string, int> out;
  for (const auto& g : grams(t, n)) ++out[g];
  return out;
}

inline double bleu(const Tokens& hyp, const std::vector<Tokens>& refs,
                   int max_n, bool add_one_high_order) {
  if (hyp.empty()) return 0.0;
  const std::size_t c = hyp.size();
  std::size_t r = refs.front().size();
  for (const auto& ref : refs) {
    auto dist = [&](std::size_t l) { return l > c ? l - c : c - l; };
    if (dist(ref.size()) < dist(r) ||
        (dist(ref.size()) == dist(r) && ref.size() < r)) {
      r = ref.size();
    }
  }
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto hyp_counts = gram_counts(hyp, n);
    long long matched = 0;
    for (const auto& [g, hc] : hyp_counts) {
      int best = 0;
      for (const auto& ref : refs) {
        const auto rc = gram_counts(ref, n);
        auto it = rc.find(g);
        if (it != rc.end()) best = std::max(best, it->second);
      }
      matched += std::min(hc, best);
    }
    long long total = 0;
    for (const auto& g : grams(hyp, n)) {
      (void)g;
      ++total;
    }
    double num = static_cast<double>(matched);
    double den = static_cast<double>(total);
    if (add_one_high_order && n >= 2 && matched == 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  const double bp =
      c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c))
            : 1.0;
  return bp * std::exp(log_sum / max_n);
}

struct Prf {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;
};

inline Prf prf(long long overlap, long long hyp_total, long long ref_total) {
  Prf out;
  if (hyp_total > 0) out.p = static_cast<double>(overlap) / hyp_total;
  if (ref_total > 0) out.r = static_cast<double>(overlap) / ref_total;
  if (out.p + out.r > 0.0) out.f = 2.0 * out.p * out.r / (out.p + out.r);
  return out;
}

inline Prf rouge_n(const Tokens& hyp, const Tokens& ref, int n) {
  const auto hc = gram_counts(hyp, n);
  const auto rc = gram_counts(ref, n);
  long long overlap = 0;
  for (const auto& [g, count] : hc) {
    auto it = rc.find(g);
    if (it != rc.end()) overlap += std::min(count, it->second);
  }
  long long ht = 0;
  long long rt = 0;
  for (const auto& [g, count] : hc) {
    (void)g;
    ht += count;
  }
  for (const auto& [g, count] : rc) {
    (void)g;
    rt += count;
  }
  return prf(overlap, ht, rt);
}

inline Prf rouge_l(const Tokens& hyp, const Tokens& ref) {
  // Full quadratic LCS table, no rolling-row optimization.
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  std::vector<std::vector<long long>> dp(n + 1,
                                         std::vector<long long>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      dp[i][j] = hyp[i - 1] == ref[j - 1]
                     ? dp[i - 1][j - 1] + 1
                     : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return prf(dp[n][m], static_cast<long long>(n), static_cast<long long>(m));
}

inline std::vector<double> cider(const std::vector<Tokens>& hyps,
                                 const std::vector<std::vector<Tokens>>& refs,
                                 int max_n) {
  const std::size_t corpus = refs.size();
  // Document frequency per order.
  std::vector<std::map<std::string, int>> df(max_n + 1);
  for (const auto& ref_set : refs) {
    for (int n = 1; n <= max_n; ++n) {
      std::set<std::string> seen;
      for (const auto& ref : ref_set) {
        for (const auto& g : grams(ref, n)) seen.insert(g);
      }
      for (const auto& g : seen) ++df[n][g];
    }
  }
  auto idf = [&](int n, const std::string& g) {
    auto it = df[n].find(g);
    const int d = it == df[n].end() ? 0 : it->second;
    return std::log(static_cast<double>(corpus) / std::max(1, d));
  };
  auto tfidf = [&](const Tokens& t, int n) {
    std::map<std::string, double> vec;
    for (const auto& [g, count] : gram_counts(t, n)) {
      vec[g] = static_cast<double>(count) * idf(n, g);
    }
    return vec;
  };
  auto cosine = [](const std::map<std::string, double>& a,
                   const std::map<std::string, double>& b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (const auto& [g, v] : a) {
      na += v * v;
      auto it = b.find(g);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [g, v] : b) {
      (void)g;
      nb += v * v;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  std::vector<double> out;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    double order_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
      const auto hv = tfidf(hyps[i], n);
      double ref_sum = 0.0;
      for (const auto& ref : refs[i]) ref_sum += cosine(hv, tfidf(ref, n));
      order_sum += ref_sum / static_cast<double>(refs[i].size());
    }
    out.push_back(10.0 * order_sum / static_cast<double>(max_n));
  }
  return out;
}

// Character-level token F1 over whitespace-stripped codepoints is awkward to
// reproduce without the library tokenizer; this oracle splits UTF-8 by hand.
inline std::vector<std::string> codepoint_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > text.size()) len = 1;
    std::string tok = text.substr(i, len);
    i += len;
    if (tok == " " || tok == "\t" || tok == "\n" || tok == "\r") continue;
    out.push_back(tok);
  }
  return out;
}

inline double token_f1(const std::string& a, const std::string& b) {
  const auto ta = codepoint_tokens(a);
  const auto tb = codepoint_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : ta) ++counts[t];
  long long overlap = 0;
  for (const auto& t : tb) {
    if (counts[t] > 0) {
      --counts[t];
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / ta.size();
  const double r = static_cast<double>(overlap) / tb.size();
  return 2.0 * p * r / (p + r);
}

// Standalone re-implementation of the hashed char-3-gram embedding.
inline std::uint64_t fnv(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::string> raw_codepoints(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > text.size()) len = 1;
    out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

inline std::vector<double> embed(const std::string& text, int dim) {
  std::vector<double> v(dim, 0.0);
  const auto cps = raw_codepoints(text);
  if (cps.empty()) return v;
  std::vector<std::string> window_grams;
  if (cps.size() < 3) {
    window_grams.push_back(text);
  } else {
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      window_grams.push_back(cps[i] + cps[i + 1] + cps[i + 2]);
    }
  }
  for (const auto& g : window_grams) {
    const std::uint64_t h1 = fnv(g, 0xcbf29ce484222325ULL);
    const std::uint64_t h2 = fnv(g, 0x9ae16a3b2f90404fULL);
    const double sign = (h2 & 1) ? 1.0 : -1.0;
    v[h1 % static_cast<std::uint64_t>(dim)] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Pairwise Mann-Whitney enumeration.
inline double auc_pairwise(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  double wins = 0.0;
  double ties = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) ties += 1.0;
    }
  }
  return (wins + 0.5 * ties) / static_cast<double>(pairs);
}

}  // namespace oracle

#endif  // ADMIX_TESTS_ORACLES_HPP_
