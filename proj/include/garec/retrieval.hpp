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
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "garec/adapter.hpp"
#include "garec/corpus.hpp"
#include "garec/detail/csv.hpp"
#include "garec/detail/format.hpp"
#include "garec/embed_store.hpp"
#include "garec/error.hpp"
#include "garec/lexical.hpp"

namespace garec {

enum class Task { kIntra, kInter };

inline std::string_view to_string(Task t) { return t == Task::kIntra ? "intra" : "inter"; }

inline std::optional<Task> parse_task(std::string_view s) {
  if (s == "intra") return Task::kIntra;
  if (s == "inter") return Task::kInter;
  return std::nullopt;
}

// One rankable item. For intra, `id` is the figure id; for inter it is the
// paper id owning the GA.
struct Candidate {
  std::string id;
  std::string paper_id;
  std::string figure_id;
  std::vector<std::string> subfigure_ids;
};

struct CandidateSet {
  std::string query_paper_id;
  Task task = Task::kIntra;
  std::vector<Candidate> candidates;
  std::set<std::string> gt_ids;  // empty for inter
};

// Intra: every figure of the paper in document order, GA included.
// Inter: the GA of every other paper in `reference_split`, in corpus order.
inline CandidateSet build_candidates(const Corpus& corpus, std::string_view paper_id, Task task,
                                     Split reference_split = Split::kTrain, GtPolicy policy = GtPolicy::kGaOnly) {
  const PaperRecord& paper = corpus.at(paper_id);
  CandidateSet set;
  set.query_paper_id = paper.paper_id;
  set.task = task;
  if (task == Task::kIntra) {
    set.gt_ids = ground_truth_set(paper, policy);
    for (const auto& f : paper.figures) {
      Candidate c{f.figure_id, paper.paper_id, f.figure_id, {}};
      for (const auto& s : f.subfigures) c.subfigure_ids.push_back(s.subfigure_id);
      set.candidates.push_back(std::move(c));
    }
    return set;
  }
  for (const auto& other : corpus.papers()) {
    if (other.split != reference_split || !other.ga || other.paper_id == paper.paper_id) continue;
    const FigureRecord* ga = other.find_figure(other.ga->ga_figure_id);
    Candidate c{other.paper_id, other.paper_id, ga->figure_id, {}};
    for (const auto& s : ga->subfigures) c.subfigure_ids.push_back(s.subfigure_id);
    set.candidates.push_back(std::move(c));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Ranked lists
// ---------------------------------------------------------------------------

struct RankedEntry {
  std::string candidate_id;
  double score = 0.0;
  bool scored = true;  // false: no usable sub-score, ranked after every scored entry
  std::size_t insertion_index = 0;
};

struct RankedList {
  std::string query_paper_id;
  std::vector<RankedEntry> entries;
  std::string method;
  std::string tie_break = "insertion-index";

  std::size_t unscored_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const RankedEntry& e) { return !e.scored; }));
  }
};

// Orders by (scored first, score desc, insertion index asc).
inline void sort_ranked(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.scored != b.scored) return a.scored;
    if (a.scored && a.score != b.score) return a.score > b.score;
    return a.insertion_index < b.insertion_index;
  });
}

inline RankedList top_k(const RankedList& list, std::size_t k) {
  if (k == 0) throw ValidationError("top_k requires k >= 1");
  RankedList out = list;
  if (out.entries.size() > k) out.entries.resize(k);
  return out;
}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

enum class Method { kRougeL, kBm25, kCider, kAbs2Fig, kAbs2FigCap, kRandom };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kRougeL: return "abs2cap-rougeL";
    case Method::kBm25: return "abs2cap-bm25";
    case Method::kCider: return "abs2cap-cider";
    case Method::kAbs2Fig: return "abs2fig";
    case Method::kAbs2FigCap: return "abs2fig-cap";
    case Method::kRandom: return "random";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (auto m : {Method::kRougeL, Method::kBm25, Method::kCider, Method::kAbs2Fig, Method::kAbs2FigCap,
                 Method::kRandom}) {
    if (to_string(m) == s) return m;
  }
  if (s == "rougeL" || s == "rouge-l") return Method::kRougeL;
  if (s == "bm25") return Method::kBm25;
  if (s == "cider") return Method::kCider;
  return std::nullopt;
}

inline bool uses_embeddings(Method m) { return m == Method::kAbs2Fig || m == Method::kAbs2FigCap; }
inline bool is_lexical(Method m) { return m == Method::kRougeL || m == Method::kBm25 || m == Method::kCider; }

struct MethodConfig {
  Method method = Method::kAbs2Fig;
  std::optional<std::uint64_t> seed;            // random only
  std::optional<LinearAdapter> adapter;         // applied to figure/GA vectors
  bool lexical_subfigures = true;               // subfigure captions join the max for abs2cap-*
  Bm25Params bm25;
};

// Text used by the lexical scorers. Unbalanced special tokens fall back to
// the raw text rather than failing the whole query.
inline std::string clean_abstract(std::string_view text) {
  try {
    return strip_special_tokens(text, SpecialTokenMode::kDrop);
  } catch (const ValidationError&) {
    return std::string(text);
  }
}

inline std::string clean_caption(std::string_view caption) { return strip_caption_tags(clean_abstract(caption)); }

// Captions a candidate contributes to lexical scoring: its own caption, then
// its subfigure captions when enabled.
inline std::vector<TokenSeq> candidate_caption_tokens(const Corpus& corpus, const Candidate& c, bool with_subfigures) {
  const FigureRecord* fig = corpus.at(c.paper_id).find_figure(c.figure_id);
  std::vector<TokenSeq> out;
  out.push_back(normalize(clean_caption(fig->caption)));
  if (with_subfigures) {
    for (const auto& s : fig->subfigures) out.push_back(normalize(clean_caption(s.caption)));
  }
  return out;
}

// idf over every caption (figure and subfigure) of the given papers.
inline IdfTable build_caption_idf(const std::vector<const PaperRecord*>& papers) {
  std::vector<TokenSeq> docs;
  for (const auto* p : papers) {
    for (const auto& f : p->figures) {
      docs.push_back(normalize(clean_caption(f.caption)));
      for (const auto& s : f.subfigures) docs.push_back(normalize(clean_caption(s.caption)));
    }
  }
  return IdfTable::build(docs);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

struct FigureKeys {
  std::vector<EntityKey> image;  // first present key wins
  EntityKey caption;
};

// Inter candidates are GAs: a dedicated "ga:<paper>" vector wins over the
// figure vector of the GA figure.
inline FigureKeys own_keys(const CandidateSet& set, const Candidate& c) {
  FigureKeys k;
  if (set.task == Task::kInter) {
    k.image = {EntityKey::ga(c.paper_id), EntityKey::figure(c.paper_id, c.figure_id)};
  } else {
    k.image = {EntityKey::figure(c.paper_id, c.figure_id)};
  }
  k.caption = EntityKey::caption(c.paper_id, c.figure_id);
  return k;
}

inline FigureKeys sub_keys(const Candidate& c, const std::string& sub) {
  return {{EntityKey::subfigure(c.paper_id, c.figure_id, sub)}, EntityKey::caption(c.paper_id, c.figure_id, sub)};
}

inline std::optional<double> embedding_score(const MethodConfig& cfg, const EmbeddingStore& store,
                                             const Vector& query, const std::string& query_key,
                                             const FigureKeys& keys) {
  std::optional<std::span<const float>> img;
  std::string img_key;
  for (const auto& k : keys.image) {
    img = store.find(k);
    if (img) {
      img_key = k.str();
      break;
    }
  }
  if (!img) return std::nullopt;
  Vector v = cfg.adapter ? cfg.adapter->apply(*img) : Vector(img->begin(), img->end());
  std::string v_key = img_key;
  if (cfg.method == Method::kAbs2FigCap) {
    auto cap = store.find(keys.caption);
    if (!cap) return std::nullopt;
    v = fuse_hadamard(std::span<const double>(v), *cap);
    v_key += " * " + keys.caption.str();
  }
  return cosine(std::span<const double>(query), std::span<const double>(v), query_key, v_key);
}

}  // namespace detail

// Scores every candidate and returns them ranked. A multi-part figure scores
// the max over its own score and its subfigures' scores. Candidates with no
// available sub-score are kept, flagged unscored, and ranked last.
inline RankedList score_candidates(const MethodConfig& cfg, const CandidateSet& set, const Corpus& corpus,
                                   const EmbeddingStore* store = nullptr, const IdfTable* idf = nullptr) {
  RankedList out;
  out.query_paper_id = set.query_paper_id;
  out.method = std::string(to_string(cfg.method));
  out.entries.reserve(set.candidates.size());
  const PaperRecord& query = corpus.at(set.query_paper_id);

  std::vector<std::optional<double>> scores(set.candidates.size());

  if (uses_embeddings(cfg.method)) {
    if (!store) throw MissingEmbeddingError("embedding store required for " + out.method);
    const EntityKey qk = EntityKey::abstract(query.paper_id);
    const Vector qv = store->get(qk);
    if (l2_norm(std::span<const double>(qv)) == 0.0) throw ZeroNormError(qk.str());
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
      const Candidate& c = set.candidates[i];
      std::optional<double> best = detail::embedding_score(cfg, *store, qv, qk.str(), detail::own_keys(set, c));
      for (const auto& sub : c.subfigure_ids) {
        auto s = detail::embedding_score(cfg, *store, qv, qk.str(), detail::sub_keys(c, sub));
        if (s && (!best || *s > *best)) best = s;
      }
      scores[i] = best;
    }
  } else if (is_lexical(cfg.method)) {
    const TokenSeq abstract = normalize(clean_abstract(query.abstract));
    std::vector<std::vector<TokenSeq>> texts;
    texts.reserve(set.candidates.size());
    for (const auto& c : set.candidates) texts.push_back(candidate_caption_tokens(corpus, c, cfg.lexical_subfigures));
    Bm25Stats bm25_stats;
    if (cfg.method == Method::kBm25) {
      std::vector<TokenSeq> pool;
      for (const auto& t : texts) pool.insert(pool.end(), t.begin(), t.end());
      bm25_stats = Bm25Stats(pool);
    }
    IdfTable local_idf;
    if (cfg.method == Method::kCider && !idf) {
      std::vector<TokenSeq> pool;
      for (const auto& t : texts) pool.insert(pool.end(), t.begin(), t.end());
      local_idf = IdfTable::build(pool);
      idf = &local_idf;
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      double best = 0.0;
      bool any = false;
      for (const auto& caption : texts[i]) {
        double s = 0.0;
        switch (cfg.method) {
          case Method::kRougeL: s = rouge_l(caption, abstract); break;
          case Method::kBm25: s = bm25(abstract, caption, bm25_stats, cfg.bm25); break;
          default: s = cider(caption, abstract, *idf); break;
        }
        if (!any || s > best) best = s;
        any = true;
      }
      scores[i] = best;
    }
  } else {
    if (!cfg.seed) throw ValidationError("method random requires a seed");
    const std::uint64_t h = fnv1a64(set.query_paper_id);
    std::seed_seq seq{static_cast<std::uint32_t>(*cfg.seed), static_cast<std::uint32_t>(*cfg.seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    std::mt19937_64 gen(seq);
    for (auto& s : scores) s = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }

  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    RankedEntry e;
    e.candidate_id = set.candidates[i].id;
    e.insertion_index = i;
    e.scored = scores[i].has_value();
    e.score = scores[i].value_or(0.0);
    out.entries.push_back(std::move(e));
  }
  sort_ranked(out.entries);
  return out;
}

// ---------------------------------------------------------------------------
// Score-matrix CSV: query_id,candidate_id,raw_score,rank (rank 1-based; an
// unscored candidate has an empty raw_score).
// ---------------------------------------------------------------------------

inline void write_score_header(std::ostream& os) { os << "query_id,candidate_id,raw_score,rank\n"; }

inline void write_scores(std::ostream& os, const RankedList& list) {
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    const auto& e = list.entries[r];
    garec::detail::write_csv_row(
        os, {list.query_paper_id, e.candidate_id, e.scored ? garec::detail::format_double(e.score) : "",
             std::to_string(r + 1)});
  }
}

// Groups rows by query (first-appearance order) and orders each group by
// its rank column. Ranks must be 1..n without gaps and agree with the score
// order; unscored rows come last.
inline std::vector<RankedList> read_scores(std::istream& is) {
  std::vector<std::string> row;
  if (!garec::detail::read_csv_row(is, row) || row != std::vector<std::string>{"query_id", "candidate_id", "raw_score", "rank"}) {
    throw ValidationError("score CSV must start with header query_id,candidate_id,raw_score,rank");
  }
  std::vector<RankedList> lists;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::pair<long, RankedEntry>>> rows;
  std::size_t line = 1;
  while (garec::detail::read_csv_row(is, row)) {
    ++line;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 4) throw ValidationError("score CSV line " + std::to_string(line) + ": expected 4 fields");
    auto [it, inserted] = index.emplace(row[0], lists.size());
    if (inserted) {
      lists.push_back(RankedList{row[0], {}, "external", "rank-column"});
      rows.emplace_back();
    }
    RankedEntry e;
    e.candidate_id = row[1];
    e.scored = !row[2].empty();
    if (e.scored) {
      e.score = garec::detail::parse_double(row[2], "raw_score on line " + std::to_string(line));
      if (!std::isfinite(e.score)) throw ValidationError("score CSV line " + std::to_string(line) + ": non-finite raw_score");
    }
    long rank = 0;
    if (!garec::detail::parse_number(row[3], rank) || rank < 1) {
      throw ValidationError("score CSV line " + std::to_string(line) + ": bad rank '" + row[3] + "'");
    }
    rows[it->second].emplace_back(rank, std::move(e));
  }
  for (std::size_t q = 0; q < lists.size(); ++q) {
    auto& group = rows[q];
    std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::set<std::string> seen;
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].first != static_cast<long>(i + 1)) {
        throw ValidationError("score CSV: ranks of query '" + lists[q].query_paper_id + "' are not 1..n");
      }
      if (!seen.insert(group[i].second.candidate_id).second) {
        throw ValidationError("score CSV: duplicate candidate '" + group[i].second.candidate_id + "' for query '" +
                              lists[q].query_paper_id + "'");
      }
      if (i > 0) {
        const auto& prev = group[i - 1].second;
        const auto& cur = group[i].second;
        if ((!prev.scored && cur.scored) || (prev.scored && cur.scored && cur.score > prev.score)) {
          throw ValidationError("score CSV: ranks of query '" + lists[q].query_paper_id +
                                "' contradict raw_score order at rank " + std::to_string(i + 1));
        }
      }
      group[i].second.insertion_index = i;
      lists[q].entries.push_back(std::move(group[i].second));
    }
  }
  return lists;
}

}  // namespace garec
