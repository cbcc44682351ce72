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
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "garec/corpus.hpp"
#include "garec/detail/csv.hpp"
#include "garec/detail/format.hpp"
#include "garec/embed_store.hpp"
#include "garec/error.hpp"
#include "garec/retrieval.hpp"

namespace garec {

inline constexpr double kClipScoreWeight = 2.5;

// Fraction of the top-k recommended GAs whose paper shares the query's
// primary category. Lists shorter than k are scored over their length.
inline double field_precision_at_k(const RankedList& list, std::size_t k, const Corpus& corpus,
                                   std::string_view query_paper_id) {
  if (k == 0) throw ValidationError("Field-P@k requires k >= 1");
  const std::string& category = corpus.at(query_paper_id).primary_category;
  const std::size_t n = std::min(k, list.entries.size());
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const PaperRecord* p = corpus.find(list.entries[i].candidate_id);
    if (!p) throw ValidationError("candidate '" + list.entries[i].candidate_id + "' maps to no paper with a category");
    if (p->primary_category == category) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct SimStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline SimStats moments(const std::vector<double>& values) {
  SimStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

// Mean and population std of cosine(query, c) over the candidates.
inline SimStats sim_stats_at_k(const Vector& query, const std::vector<Vector>& candidates,
                               const std::vector<std::string>& names = {}) {
  std::vector<double> sims;
  sims.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string name = i < names.size() ? names[i] : "candidate " + std::to_string(i);
    sims.push_back(cosine(query, candidates[i], "query", name));
  }
  return moments(sims);
}

// weight * max(cos(u, v), 0); the clamp can be disabled.
inline double clip_score_pair(const Vector& u, const Vector& v, double weight = kClipScoreWeight, bool clamp = true) {
  if (!(weight > 0.0)) throw ValidationError("CLIPScore weight must be positive");
  const double rho = cosine(u, v);
  return weight * (clamp ? std::max(rho, 0.0) : rho);
}

// ---------------------------------------------------------------------------
// Inter report
// ---------------------------------------------------------------------------

struct InterConfig {
  std::size_t k = 5;
  double clip_weight = kClipScoreWeight;
  bool clip_clamp = true;
};

struct InterRow {
  std::string query_id;
  double field_p = 0.0;
  SimStats abs2abs;
  std::optional<SimStats> ga2ga;  // absent when a GA embedding is missing
};

struct InterMetricReport {
  InterConfig config;
  std::vector<InterRow> rows;
  double mean_field_p = 0.0;
  double mean_abs2abs = 0.0;
  double mean_abs2abs_std = 0.0;
  double mean_ga2ga = 0.0;
  double mean_ga2ga_std = 0.0;
  std::size_t ga2ga_queries = 0;
  std::size_t ga2ga_skipped = 0;
};

// The GA image vector of a paper: "ga:<paper>" or else its GA figure's vector.
inline std::optional<Vector> ga_vector(const EmbeddingStore& store, const PaperRecord& paper) {
  if (auto v = store.try_get(EntityKey::ga(paper.paper_id))) return v;
  if (paper.ga) return store.try_get(EntityKey::figure(paper.paper_id, paper.ga->ga_figure_id));
  return std::nullopt;
}

inline InterRow evaluate_inter(const RankedList& list, const Corpus& corpus, const EmbeddingStore& store,
                               const InterConfig& cfg) {
  InterRow row;
  row.query_id = list.query_paper_id;
  row.field_p = field_precision_at_k(list, cfg.k, corpus, list.query_paper_id);
  const RankedList top = top_k(list, cfg.k);
  const EntityKey qk = EntityKey::abstract(list.query_paper_id);
  const Vector q = store.get(qk);

  std::vector<double> sims;
  for (const auto& e : top.entries) {
    const EntityKey ck = EntityKey::abstract(e.candidate_id);
    sims.push_back(cosine(q, store.get(ck), qk.str(), ck.str()));
  }
  row.abs2abs = moments(sims);

  const PaperRecord& query = corpus.at(list.query_paper_id);
  if (auto author_ga = ga_vector(store, query)) {
    std::vector<double> scores;
    bool complete = true;
    for (const auto& e : top.entries) {
      auto cand = ga_vector(store, corpus.at(e.candidate_id));
      if (!cand) {
        complete = false;
        break;
      }
      scores.push_back(clip_score_pair(*author_ga, *cand, cfg.clip_weight, cfg.clip_clamp));
    }
    if (complete && !scores.empty()) row.ga2ga = moments(scores);
  }
  return row;
}

inline InterMetricReport aggregate_inter(std::vector<InterRow> rows, const InterConfig& cfg) {
  if (rows.empty()) throw ValidationError("no evaluated queries to aggregate");
  InterMetricReport r;
  r.config = cfg;
  r.rows = std::move(rows);
  for (const auto& row : r.rows) {
    r.mean_field_p += row.field_p;
    r.mean_abs2abs += row.abs2abs.mean;
    r.mean_abs2abs_std += row.abs2abs.std;
    if (row.ga2ga) {
      ++r.ga2ga_queries;
      r.mean_ga2ga += row.ga2ga->mean;
      r.mean_ga2ga_std += row.ga2ga->std;
    } else {
      ++r.ga2ga_skipped;
    }
  }
  const double n = static_cast<double>(r.rows.size());
  r.mean_field_p /= n;
  r.mean_abs2abs /= n;
  r.mean_abs2abs_std /= n;
  if (r.ga2ga_queries) {
    r.mean_ga2ga /= static_cast<double>(r.ga2ga_queries);
    r.mean_ga2ga_std /= static_cast<double>(r.ga2ga_queries);
  }
  return r;
}

inline void write_inter_csv(std::ostream& os, const InterMetricReport& r) {
  const std::string k = std::to_string(r.config.k);
  detail::write_csv_row(os, {"query_id", "field_p_at_" + k, "abs2abs_mean_" + k, "abs2abs_std_" + k,
                             "ga2ga_mean_" + k, "ga2ga_std_" + k});
  for (const auto& row : r.rows) {
    detail::write_csv_row(os, {row.query_id, detail::format_double(row.field_p), detail::format_double(row.abs2abs.mean),
                               detail::format_double(row.abs2abs.std),
                               row.ga2ga ? detail::format_double(row.ga2ga->mean) : "",
                               row.ga2ga ? detail::format_double(row.ga2ga->std) : ""});
  }
}

inline nlohmann::ordered_json to_json(const InterMetricReport& r) {
  const std::string k = std::to_string(r.config.k);
  nlohmann::ordered_json j;
  j["task"] = "inter";
  j["queries"] = r.rows.size();
  j["field_p_at_" + k] = r.mean_field_p;
  j["abs2abs_mean_" + k] = r.mean_abs2abs;
  j["abs2abs_std_" + k] = r.mean_abs2abs_std;
  j["ga2ga_mean_" + k] = r.ga2ga_queries ? nlohmann::ordered_json(r.mean_ga2ga) : nlohmann::ordered_json(nullptr);
  j["ga2ga_std_" + k] = r.ga2ga_queries ? nlohmann::ordered_json(r.mean_ga2ga_std) : nlohmann::ordered_json(nullptr);
  j["ga2ga_queries"] = r.ga2ga_queries;
  j["ga2ga_skipped"] = r.ga2ga_skipped;
  j["clip_weight"] = r.config.clip_weight;
  j["clip_clamp"] = r.config.clip_clamp;
  return j;
}

}  // namespace garec
