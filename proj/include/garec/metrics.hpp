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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "garec/detail/csv.hpp"
#include "garec/detail/format.hpp"
#include "garec/error.hpp"
#include "garec/retrieval.hpp"

namespace garec {

// ---------------------------------------------------------------------------
// Distribution helpers
// ---------------------------------------------------------------------------

// z-scores of `window` using the mean and population std of `basis`; all
// zero when the spread is zero.
inline Vector zscores(std::span<const double> window, std::span<const double> basis) {
  const double n = static_cast<double>(basis.size());
  double mean = 0.0;
  for (double s : basis) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : basis) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / n);
  Vector z(window.size(), 0.0);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < window.size(); ++i) z[i] = (window[i] - mean) / sd;
  }
  return z;
}

// Max-shifted softmax, in place.
inline Vector softmax(Vector z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

// z-score with population std, then softmax. A zero spread (including a
// single score) yields the uniform distribution.
inline Vector softmax_z(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("softmax_z of an empty score vector");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("softmax_z: non-finite score");
  }
  return softmax(zscores(scores, scores));
}

inline Vector softmax_z(const Vector& scores) { return softmax_z(std::span<const double>(scores)); }

inline void check_distribution(std::span<const double> p) {
  if (p.empty()) throw ValidationError("empty probability vector");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("probability vector has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("probability vector sums to " + detail::format_double(sum));
}

// Natural-log Shannon entropy with 0 ln 0 = 0. An exactly uniform vector
// returns ln k exactly.
inline double entropy(std::span<const double> p) {
  check_distribution(p);
  if (std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; })) {
    return std::log(static_cast<double>(p.size()));
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(0.0, h);
}

inline double entropy(const Vector& p) { return entropy(std::span<const double>(p)); }

// Confidence term in [0.5, 1]: 1 while H <= h = alpha ln k, then falling
// linearly to 0.5 at H = ln k. Degenerate thresholds (alpha = 1, k = 1)
// give 1.
inline double confidence_from_entropy(double h_value, std::size_t k, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  const double hmax = std::log(static_cast<double>(k));
  const double h = alpha * hmax;
  if (h_value <= h) return 1.0;
  const double span = hmax - h;
  if (!(span > 0.0)) return 1.0;
  const double excess = std::min(1.0, std::max(0.0, (h_value - h) / span));
  return 1.0 - 0.5 * excess;
}

inline double confidence(std::span<const double> p, double alpha) {
  return confidence_from_entropy(entropy(p), p.size(), alpha);
}

inline double confidence(const Vector& p, double alpha) { return confidence(std::span<const double>(p), alpha); }

// ---------------------------------------------------------------------------
// CAR@k
// ---------------------------------------------------------------------------

enum class ZScoreScope { kTopK, kFull };

inline std::optional<ZScoreScope> parse_zscore_scope(std::string_view s) {
  if (s == "topk") return ZScoreScope::kTopK;
  if (s == "full") return ZScoreScope::kFull;
  return std::nullopt;
}

struct CarConfig {
  std::size_t k = 5;
  double alpha = 0.5;
  ZScoreScope scope = ZScoreScope::kTopK;
};

struct CarBreakdown {
  double car = 0.0;
  double ratio = 0.0;       // p_GT / p_top-1 (0 when no GT in the top k)
  double confidence = 1.0;
  double entropy = 0.0;
  double h = 0.0;           // alpha * ln k_eff
  bool gt_in_top_k = false;
  std::size_t k_eff = 0;
  Vector probabilities;
};

inline void check_gt(const std::set<std::string>& gt_ids) {
  if (gt_ids.empty()) throw ValidationError("empty ground-truth set");
}

// Top-k scores -> z-score -> softmax gives P. The GT probability is that of
// the highest-ranked GT inside the top k; with no GT there, CAR is 0 but the
// ratio/confidence diagnostics are still filled in from P. Lists shorter
// than k use k_eff = |list| throughout. Unscored entries never enter P.
inline CarBreakdown car_at_k(const RankedList& list, const std::set<std::string>& gt_ids, const CarConfig& cfg) {
  check_gt(gt_ids);
  if (list.entries.empty()) throw ValidationError("CAR@k of an empty ranked list");
  if (cfg.k == 0) throw ValidationError("CAR@k requires k >= 1");
  CarBreakdown b;
  std::vector<double> scored;
  for (const auto& e : list.entries) {
    if (e.scored) scored.push_back(e.score);
  }
  const std::size_t k_eff = std::min({cfg.k, list.entries.size(), scored.size()});
  b.k_eff = k_eff;
  if (k_eff == 0) return b;

  if (cfg.scope == ZScoreScope::kTopK) {
    b.probabilities = softmax_z(std::span<const double>(scored.data(), k_eff));
  } else {
    b.probabilities = softmax(zscores(std::span<const double>(scored.data(), k_eff), scored));
  }

  b.entropy = entropy(b.probabilities);
  b.h = cfg.alpha * std::log(static_cast<double>(k_eff));
  b.confidence = confidence_from_entropy(b.entropy, k_eff, cfg.alpha);
  for (std::size_t i = 0; i < k_eff; ++i) {
    if (gt_ids.count(list.entries[i].candidate_id)) {
      b.gt_in_top_k = true;
      b.ratio = b.probabilities[i] / b.probabilities[0];
      break;
    }
  }
  b.car = b.gt_in_top_k ? b.ratio * b.confidence : 0.0;
  return b;
}

// ---------------------------------------------------------------------------
// Rank metrics (binary relevance, 1-based ranks over the full list)
// ---------------------------------------------------------------------------

inline std::optional<std::size_t> first_gt_rank(const RankedList& list, const std::set<std::string>& gt_ids) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (gt_ids.count(list.entries[i].candidate_id)) return i + 1;
  }
  return std::nullopt;
}

inline int recall_at_k(const RankedList& list, const std::set<std::string>& gt_ids, std::size_t k) {
  check_gt(gt_ids);
  auto r = first_gt_rank(list, gt_ids);
  return r && *r <= k ? 1 : 0;
}

inline double mrr(const RankedList& list, const std::set<std::string>& gt_ids) {
  check_gt(gt_ids);
  auto r = first_gt_rank(list, gt_ids);
  return r ? 1.0 / static_cast<double>(*r) : 0.0;
}

inline double ndcg_at_k(const RankedList& list, const std::set<std::string>& gt_ids, std::size_t k) {
  check_gt(gt_ids);
  double dcg = 0.0;
  const std::size_t n = std::min(k, list.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (gt_ids.count(list.entries[i].candidate_id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double ideal = 0.0;
  const std::size_t rel = std::min(k, gt_ids.size());
  for (std::size_t i = 0; i < rel; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

// ---------------------------------------------------------------------------
// Intra report
// ---------------------------------------------------------------------------

struct IntraRow {
  std::string query_id;
  std::vector<int> recall;  // aligned with IntraMetricReport::ks
  double mrr = 0.0;
  double ndcg = 0.0;
  CarBreakdown car;
};

inline constexpr std::size_t kCarHistogramBins = 20;  // width 0.05 over [0, 1]

struct IntraMetricReport {
  std::vector<std::size_t> ks;
  std::size_t at = 5;  // k used for nDCG and CAR
  double alpha = 0.5;
  std::vector<IntraRow> rows;

  std::vector<double> mean_recall;
  double mean_mrr = 0.0;
  double mean_ndcg = 0.0;
  double mean_car = 0.0;
  double car_above_half = 0.0;
  double mean_car_ratio = 0.0;
  double mean_car_confidence = 0.0;
  std::vector<std::size_t> car_histogram;
};

inline IntraRow evaluate_intra(const RankedList& list, const std::set<std::string>& gt_ids,
                               const std::vector<std::size_t>& ks, const CarConfig& car_cfg) {
  IntraRow row;
  row.query_id = list.query_paper_id;
  for (auto k : ks) row.recall.push_back(recall_at_k(list, gt_ids, k));
  row.mrr = mrr(list, gt_ids);
  row.ndcg = ndcg_at_k(list, gt_ids, car_cfg.k);
  row.car = car_at_k(list, gt_ids, car_cfg);
  return row;
}

inline std::size_t car_bin(double car) {
  const double scaled = std::floor(car * static_cast<double>(kCarHistogramBins));
  if (!(scaled > 0.0)) return 0;
  return std::min(kCarHistogramBins - 1, static_cast<std::size_t>(scaled));
}

inline IntraMetricReport aggregate_intra(std::vector<IntraRow> rows, std::vector<std::size_t> ks, std::size_t at = 5,
                                         double alpha = 0.5) {
  if (rows.empty()) throw ValidationError("no evaluated queries to aggregate");
  IntraMetricReport r;
  r.ks = std::move(ks);
  r.at = at;
  r.alpha = alpha;
  r.rows = std::move(rows);
  r.mean_recall.assign(r.ks.size(), 0.0);
  r.car_histogram.assign(kCarHistogramBins, 0);
  std::size_t above = 0;
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < r.ks.size(); ++i) r.mean_recall[i] += row.recall.at(i);
    r.mean_mrr += row.mrr;
    r.mean_ndcg += row.ndcg;
    r.mean_car += row.car.car;
    r.mean_car_ratio += row.car.ratio;
    r.mean_car_confidence += row.car.confidence;
    if (row.car.car > 0.5) ++above;
    ++r.car_histogram[car_bin(row.car.car)];
  }
  const double n = static_cast<double>(r.rows.size());
  for (auto& v : r.mean_recall) v /= n;
  r.mean_mrr /= n;
  r.mean_ndcg /= n;
  r.mean_car /= n;
  r.mean_car_ratio /= n;
  r.mean_car_confidence /= n;
  r.car_above_half = static_cast<double>(above) / n;
  return r;
}

inline void write_intra_csv(std::ostream& os, const IntraMetricReport& r) {
  std::vector<std::string> header{"query_id"};
  for (auto k : r.ks) header.push_back("r_at_" + std::to_string(k));
  const std::string at = std::to_string(r.at);
  for (std::string c : std::vector<std::string>{"mrr", "ndcg_at_" + at, "car_at_" + at, "car_ratio",
                                                 "car_confidence", "car_entropy", "gt_in_top_k"}) {
    header.push_back(std::move(c));
  }
  detail::write_csv_row(os, header);
  for (const auto& row : r.rows) {
    std::vector<std::string> f{row.query_id};
    for (int v : row.recall) f.push_back(std::to_string(v));
    f.push_back(detail::format_double(row.mrr));
    f.push_back(detail::format_double(row.ndcg));
    f.push_back(detail::format_double(row.car.car));
    f.push_back(detail::format_double(row.car.ratio));
    f.push_back(detail::format_double(row.car.confidence));
    f.push_back(detail::format_double(row.car.entropy));
    f.push_back(row.car.gt_in_top_k ? "1" : "0");
    detail::write_csv_row(os, f);
  }
}

inline void write_car_histogram_csv(std::ostream& os, const IntraMetricReport& r) {
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < r.car_histogram.size(); ++i) {
    os << detail::format_double(static_cast<double>(i) / kCarHistogramBins) << ','
       << detail::format_double(static_cast<double>(i + 1) / kCarHistogramBins) << ',' << r.car_histogram[i] << '\n';
  }
}

inline nlohmann::ordered_json to_json(const IntraMetricReport& r) {
  nlohmann::ordered_json j;
  const std::string at = std::to_string(r.at);
  j["task"] = "intra";
  j["queries"] = r.rows.size();
  j["alpha"] = r.alpha;
  for (std::size_t i = 0; i < r.ks.size(); ++i) j["r_at_" + std::to_string(r.ks[i])] = r.mean_recall[i];
  j["mrr"] = r.mean_mrr;
  j["ndcg_at_" + at] = r.mean_ndcg;
  j["car_at_" + at] = r.mean_car;
  j["car_at_" + at + "_above_0_5"] = r.car_above_half;
  j["car_ratio"] = r.mean_car_ratio;
  j["car_confidence"] = r.mean_car_confidence;
  // Reserved for externally computed lexical metrics merged after the fact.
  j["meteor"] = nullptr;
  j["bertscore"] = nullptr;
  nlohmann::ordered_json bins = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.car_histogram.size(); ++i) {
    bins.push_back({{"lo", static_cast<double>(i) / kCarHistogramBins},
                    {"hi", static_cast<double>(i + 1) / kCarHistogramBins},
                    {"count", r.car_histogram[i]}});
  }
  j["car_histogram"] = std::move(bins);
  return j;
}

}  // namespace garec
