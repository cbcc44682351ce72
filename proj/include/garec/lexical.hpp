// Copyright 2026 The garec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace garec {

// Normalized word tokens: lowercase ASCII, no punctuation, nonempty.
using TokenSeq = std::vector<std::string>;

// Lowercases, turns ASCII punctuation into separators and splits on
// whitespace. Bytes >= 0x80 are kept so UTF-8 words survive intact.
inline TokenSeq normalize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

inline constexpr double kRougeBeta2 = 1.2 * 1.2;

inline std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS-based F-measure; 0 when either side is empty or nothing is shared.
inline double rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta2 = kRougeBeta2) {
  const std::size_t lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  return ((1.0 + beta2) * p * r) / (r + beta2 * p);
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Document-frequency table and mean length over one scoring pool.
class Bm25Stats {
 public:
  Bm25Stats() = default;

  explicit Bm25Stats(const std::vector<TokenSeq>& pool) : doc_count_(pool.size()) {
    double total = 0.0;
    for (const auto& doc : pool) {
      total += static_cast<double>(doc.size());
      std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
      for (auto t : seen) ++df_[std::string(t)];
    }
    avgdl_ = pool.empty() ? 0.0 : total / static_cast<double>(pool.size());
  }

  std::size_t doc_count() const { return doc_count_; }
  double avgdl() const { return avgdl_; }

  std::size_t df(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }

  double idf(const std::string& term) const {
    const double n = static_cast<double>(doc_count_);
    const double d = static_cast<double>(df(term));
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
  }

 private:
  std::size_t doc_count_ = 0;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::size_t> df_;
};

// Sums over distinct query terms.
inline double bm25(const TokenSeq& query, const TokenSeq& doc, const Bm25Stats& stats, Bm25Params params = {}) {
  if (query.empty() || doc.empty()) return 0.0;
  std::unordered_map<std::string_view, double> tf;
  for (const auto& t : doc) tf[t] += 1.0;
  const double len_ratio = stats.avgdl() > 0.0 ? static_cast<double>(doc.size()) / stats.avgdl() : 0.0;
  std::set<std::string_view> terms(query.begin(), query.end());
  double score = 0.0;
  for (auto term : terms) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    const double f = it->second;
    score += stats.idf(std::string(term)) * (f * (params.k1 + 1.0)) /
             (f + params.k1 * (1.0 - params.b + params.b * len_ratio));
  }
  return score;
}

// ---------------------------------------------------------------------------
// CIDEr
// ---------------------------------------------------------------------------

inline constexpr int kCiderMaxN = 4;

inline std::map<std::string, double> ngram_counts(const TokenSeq& tokens, int n) {
  std::map<std::string, double> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (int k = 1; k < n; ++k) {
      gram += ' ';
      gram += tokens[i + k];
    }
    counts[gram] += 1.0;
  }
  return counts;
}

// n-gram idf over a reference document collection: ln(N) - ln(max(1, df)).
class IdfTable {
 public:
  IdfTable() = default;

  static IdfTable build(const std::vector<TokenSeq>& docs) {
    IdfTable t;
    t.doc_count_ = docs.size();
    for (const auto& d : docs) {
      for (int n = 1; n <= kCiderMaxN; ++n) {
        for (const auto& [gram, c] : ngram_counts(d, n)) ++t.df_[gram];
      }
    }
    return t;
  }

  // Every n-gram gets the same weight.
  static IdfTable uniform(double weight = 1.0) {
    IdfTable t;
    t.uniform_ = weight;
    return t;
  }

  std::size_t doc_count() const { return doc_count_; }

  double weight(const std::string& gram) const {
    if (uniform_) return *uniform_;
    if (doc_count_ == 0) return 0.0;
    auto it = df_.find(gram);
    const double df = it == df_.end() ? 1.0 : std::max(1.0, static_cast<double>(it->second));
    return std::log(static_cast<double>(doc_count_)) - std::log(df);
  }

 private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
  std::optional<double> uniform_;
};

// Mean over n = 1..4 of the tf-idf cosine, times 10. Orders where either
// vector is all-zero contribute 0.
inline double cider(const TokenSeq& candidate, const TokenSeq& reference, const IdfTable& idf) {
  double total = 0.0;
  for (int n = 1; n <= kCiderMaxN; ++n) {
    auto c = ngram_counts(candidate, n);
    auto r = ngram_counts(reference, n);
    double dot = 0.0, nc = 0.0, nr = 0.0;
    for (auto& [g, v] : c) {
      v *= idf.weight(g);
      nc += v * v;
    }
    for (auto& [g, v] : r) {
      v *= idf.weight(g);
      nr += v * v;
      if (auto it = c.find(g); it != c.end()) dot += it->second * v;
    }
    if (nc > 0.0 && nr > 0.0) total += dot / (std::sqrt(nc) * std::sqrt(nr));
  }
  return 10.0 * total / kCiderMaxN;
}

}  // namespace garec
