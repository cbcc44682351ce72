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
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "garec/adapter.hpp"
#include "garec/corpus.hpp"
#include "garec/embed_store.hpp"
#include "garec/error.hpp"

namespace garec {

inline constexpr double kDefaultTemperature = 0.07;

// One InfoNCE term per query. `valid[i][j]` is false for zero-padded
// negatives, which are left out of the denominator entirely.
struct LossBatch {
  std::vector<Vector> queries;
  std::vector<Vector> positives;
  std::vector<std::vector<Vector>> negatives;
  std::vector<std::vector<bool>> valid;
  double tau = kDefaultTemperature;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<Vector> d_queries;
  std::vector<Vector> d_positives;
  std::vector<std::vector<Vector>> d_negatives;
};

namespace detail {

inline void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("temperature must be positive and finite");
}

struct CosineGrad {
  double value = 0.0;
  Vector du;
  Vector dv;
};

// cos(u, v) and its partials: d/du = v/(|u||v|) - cos * u/|u|^2.
inline CosineGrad cosine_with_grad(const Vector& u, const Vector& v, std::string_view u_name,
                                   std::string_view v_name) {
  if (u.size() != v.size()) throw DimensionMismatchError("cosine of vectors with different dims");
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu2 += u[i] * u[i];
    nv2 += v[i] * v[i];
  }
  if (nu2 == 0.0) throw ZeroNormError(std::string(u_name));
  if (nv2 == 0.0) throw ZeroNormError(std::string(v_name));
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  CosineGrad g;
  // Unclamped so the value stays consistent with its derivative.
  g.value = dot / (nu * nv);
  g.du.resize(u.size());
  g.dv.resize(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    g.du[i] = v[i] / (nu * nv) - g.value * u[i] / nu2;
    g.dv[i] = u[i] / (nu * nv) - g.value * v[i] / nv2;
  }
  return g;
}

inline void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// Loss of one term; when `grad` is set, adds scale * dLoss/d(input) into
// the provided accumulators.
struct TermGrad {
  Vector* d_query = nullptr;
  Vector* d_positive = nullptr;
  std::vector<Vector*> d_negatives;
};

inline double info_nce_term(const Vector& q, const Vector& pos, const std::vector<Vector>& negs,
                            const std::vector<bool>* valid, double tau, double scale, TermGrad* grad) {
  check_tau(tau);
  if (valid && valid->size() != negs.size()) throw ValidationError("mask length differs from negatives length");
  auto is_valid = [&](std::size_t j) { return !valid || (*valid)[j]; };

  std::vector<CosineGrad> sims;
  sims.reserve(negs.size() + 1);
  sims.push_back(cosine_with_grad(q, pos, "query", "positive"));
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < negs.size(); ++j) {
    if (!is_valid(j)) continue;
    sims.push_back(cosine_with_grad(q, negs[j], "query", "negative " + std::to_string(j)));
    used.push_back(j);
  }
  // Logits relative to the positive: loss = log(1 + sum_j e^{d_j}). With
  // the positive on top this is a log1p, which keeps tiny losses accurate.
  double m = 0.0;
  std::vector<double> d(sims.size(), 0.0);
  for (std::size_t i = 1; i < sims.size(); ++i) {
    d[i] = (sims[i].value - sims[0].value) / tau;
    m = std::max(m, d[i]);
  }
  double rest = 0.0;
  std::vector<double> w(sims.size());
  w[0] = std::exp(-m);
  for (std::size_t i = 1; i < sims.size(); ++i) {
    w[i] = std::exp(d[i] - m);
    rest += w[i];
  }
  const double sum = w[0] + rest;
  const double loss = m == 0.0 ? std::log1p(rest) : m + std::log(sum);
  if (grad) {
    for (std::size_t i = 0; i < sims.size(); ++i) {
      // dL/dsim_i = (softmax_i - [i is positive]) / tau
      const double g = scale * ((w[i] / sum) - (i == 0 ? 1.0 : 0.0)) / tau;
      if (grad->d_query) axpy(g, sims[i].du, *grad->d_query);
      if (i == 0) {
        if (grad->d_positive) axpy(g, sims[i].dv, *grad->d_positive);
      } else if (Vector* dn = grad->d_negatives.empty() ? nullptr : grad->d_negatives[used[i - 1]]) {
        axpy(g, sims[i].dv, *dn);
      }
    }
  }
  return loss;
}

}  // namespace detail

// -log( e^{cos(q,+)/tau} / (e^{cos(q,+)/tau} + sum_valid e^{cos(q,-)/tau}) ),
// evaluated with a log-sum-exp shift.
inline double info_nce(const Vector& query, const Vector& positive, const std::vector<Vector>& negatives,
                       const std::vector<bool>& valid, double tau = kDefaultTemperature) {
  return detail::info_nce_term(query, positive, negatives, &valid, tau, 1.0, nullptr);
}

inline double info_nce(const Vector& query, const Vector& positive, const std::vector<Vector>& negatives,
                       double tau = kDefaultTemperature) {
  return detail::info_nce_term(query, positive, negatives, nullptr, tau, 1.0, nullptr);
}

inline void check_batch(const LossBatch& b) {
  detail::check_tau(b.tau);
  if (b.queries.size() != b.positives.size() || b.queries.size() != b.negatives.size()) {
    throw ValidationError("loss batch needs one positive and one negative list per query");
  }
  if (!b.valid.empty() && b.valid.size() != b.negatives.size()) {
    throw ValidationError("loss batch mask count differs from query count");
  }
  if (b.queries.empty()) throw ValidationError("empty loss batch");
}

inline double batch_loss(const LossBatch& b) {
  check_batch(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    total += detail::info_nce_term(b.queries[i], b.positives[i], b.negatives[i], b.valid.empty() ? nullptr : &b.valid[i],
                                   b.tau, 1.0, nullptr);
  }
  return total / static_cast<double>(b.queries.size());
}

// Mean batch loss and its exact gradient with respect to every input vector.
// Masked negatives get an all-zero gradient.
inline LossGrad info_nce_grad(const LossBatch& b) {
  check_batch(b);
  LossGrad out;
  const double scale = 1.0 / static_cast<double>(b.queries.size());
  out.d_queries.reserve(b.queries.size());
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    out.d_queries.emplace_back(b.queries[i].size(), 0.0);
    out.d_positives.emplace_back(b.positives[i].size(), 0.0);
    out.d_negatives.emplace_back();
    for (const auto& n : b.negatives[i]) out.d_negatives.back().emplace_back(n.size(), 0.0);
  }
  for (std::size_t i = 0; i < b.queries.size(); ++i) {
    detail::TermGrad tg{&out.d_queries[i], &out.d_positives[i], {}};
    for (auto& dn : out.d_negatives[i]) tg.d_negatives.push_back(&dn);
    out.loss += scale * detail::info_nce_term(b.queries[i], b.positives[i], b.negatives[i],
                                              b.valid.empty() ? nullptr : &b.valid[i], b.tau, scale, &tg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task objectives
// ---------------------------------------------------------------------------

// One paper's slot in the intra objective: abstract (query), GA (positive)
// and m sampled non-GA figures (negatives), zero-padded slots masked out.
struct IntraSample {
  Vector abstract;
  Vector ga;
  std::vector<Vector> figures;
  std::vector<bool> valid;
};

inline LossBatch intra_batch(const std::vector<IntraSample>& samples, double tau) {
  LossBatch b;
  b.tau = tau;
  for (const auto& s : samples) {
    b.queries.push_back(s.abstract);
    b.positives.push_back(s.ga);
    b.negatives.push_back(s.figures);
    b.valid.push_back(s.valid.empty() ? std::vector<bool>(s.figures.size(), true) : s.valid);
  }
  return b;
}

inline double loss_intra(const std::vector<IntraSample>& samples, double tau = kDefaultTemperature) {
  return batch_loss(intra_batch(samples, tau));
}

struct InterGrad {
  double loss = 0.0;
  std::vector<Vector> d_abstracts;
  std::vector<Vector> d_gas;
};

// Symmetric objective: half text->image with other papers' GAs as
// negatives, half image->text with other papers' abstracts.
inline InterGrad loss_inter_grad(const std::vector<Vector>& abstracts, const std::vector<Vector>& gas,
                                 double tau = kDefaultTemperature, bool with_grad = true) {
  if (abstracts.size() != gas.size()) throw ValidationError("inter loss needs one GA per abstract");
  const std::size_t n = abstracts.size();
  if (n < 2) throw ValidationError("inter loss needs a batch of at least 2");
  InterGrad out;
  out.d_abstracts.assign(n, Vector(abstracts[0].size(), 0.0));
  out.d_gas.assign(n, Vector(gas[0].size(), 0.0));
  const double scale = 0.5 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Vector> neg_gas, neg_abs;
    detail::TermGrad t2i{&out.d_abstracts[i], &out.d_gas[i], {}};
    detail::TermGrad i2t{&out.d_gas[i], &out.d_abstracts[i], {}};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      neg_gas.push_back(gas[j]);
      neg_abs.push_back(abstracts[j]);
      t2i.d_negatives.push_back(&out.d_gas[j]);
      i2t.d_negatives.push_back(&out.d_abstracts[j]);
    }
    out.loss += scale * detail::info_nce_term(abstracts[i], gas[i], neg_gas, nullptr, tau, scale,
                                              with_grad ? &t2i : nullptr);
    out.loss += scale * detail::info_nce_term(gas[i], abstracts[i], neg_abs, nullptr, tau, scale,
                                              with_grad ? &i2t : nullptr);
  }
  return out;
}

inline double loss_inter(const std::vector<Vector>& abstracts, const std::vector<Vector>& gas,
                         double tau = kDefaultTemperature) {
  return loss_inter_grad(abstracts, gas, tau, false).loss;
}

// Caption vectors for the fused objectives, aligned with IntraSample.
struct IntraCaptions {
  Vector ga;
  std::vector<Vector> figures;
};

// Replaces every figure-side vector with figure (*) caption. Padded slots
// stay as they are.
inline std::vector<IntraSample> fuse_intra(const std::vector<IntraSample>& samples,
                                           const std::vector<IntraCaptions>& captions) {
  if (samples.size() != captions.size()) throw ValidationError("one caption set per intra sample required");
  std::vector<IntraSample> out = samples;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].ga = fuse_hadamard(samples[i].ga, captions[i].ga);
    if (captions[i].figures.size() != samples[i].figures.size()) {
      throw ValidationError("caption count differs from figure count");
    }
    for (std::size_t j = 0; j < out[i].figures.size(); ++j) {
      if (!samples[i].valid.empty() && !samples[i].valid[j]) continue;
      out[i].figures[j] = fuse_hadamard(samples[i].figures[j], captions[i].figures[j]);
    }
  }
  return out;
}

inline double loss_intra_fused(const std::vector<IntraSample>& samples, const std::vector<IntraCaptions>& captions,
                               double tau = kDefaultTemperature) {
  return loss_intra(fuse_intra(samples, captions), tau);
}

inline double loss_inter_fused(const std::vector<Vector>& abstracts, const std::vector<Vector>& gas,
                               const std::vector<Vector>& ga_captions, double tau = kDefaultTemperature) {
  if (ga_captions.size() != gas.size()) throw ValidationError("one caption per GA required");
  std::vector<Vector> fused;
  for (std::size_t i = 0; i < gas.size(); ++i) fused.push_back(fuse_hadamard(gas[i], ga_captions[i]));
  return loss_inter(abstracts, fused, tau);
}

// ---------------------------------------------------------------------------
// Adapter training
// ---------------------------------------------------------------------------

enum class Objective { kIntra, kInter };

struct TrainConfig {
  std::size_t m = 4;           // non-GA figures sampled per paper
  std::size_t batch_size = 8;
  std::size_t steps = 200;
  double lr = 0.1;
  std::uint64_t seed = 0;
  double tau = kDefaultTemperature;
};

struct TrainResult {
  LinearAdapter adapter;
  std::vector<double> trace;  // loss at each step, before that step's update
};

namespace detail {

// Unbiased index in [0, n).
inline std::size_t uniform_index(std::mt19937_64& gen, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = gen();
    if (x < limit) return static_cast<std::size_t>(x % bound);
  }
}

// First `count` entries of a partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::mt19937_64& gen, std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(gen, n - i)]);
  idx.resize(count);
  return idx;
}

// Frozen inputs for one training paper.
struct TrainPaper {
  Vector abstract;
  Vector ga;
  Vector ga_caption;
  std::vector<Vector> figures;
  std::vector<Vector> captions;
};

inline Vector require(const EmbeddingStore& store, const EntityKey& key) { return store.get(key); }

inline std::vector<TrainPaper> collect_train_papers(const Corpus& corpus, const EmbeddingStore& store, bool fusion) {
  std::vector<TrainPaper> out;
  for (const PaperRecord* p : corpus.in_split(Split::kTrain)) {
    if (!p->ga) continue;
    TrainPaper t;
    t.abstract = require(store, EntityKey::abstract(p->paper_id));
    const std::string& ga_id = p->ga->ga_figure_id;
    auto fig_ga = store.try_get(EntityKey::figure(p->paper_id, ga_id));
    t.ga = fig_ga ? *fig_ga : require(store, EntityKey::ga(p->paper_id));
    if (fusion) t.ga_caption = require(store, EntityKey::caption(p->paper_id, ga_id));
    for (const auto& f : p->figures) {
      if (f.figure_id == ga_id) continue;
      t.figures.push_back(require(store, EntityKey::figure(p->paper_id, f.figure_id)));
      if (fusion) t.captions.push_back(require(store, EntityKey::caption(p->paper_id, f.figure_id)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// z = W x, optionally fused with caption c. Returns z and remembers what is
// needed to push dL/dz back onto W.
struct AdaptedVector {
  const Vector* input;
  const Vector* caption;  // null when unfused
  Vector z;
};

inline AdaptedVector adapt(const LinearAdapter& w, const Vector& x, const Vector* caption) {
  AdaptedVector a{&x, caption, w.apply(x)};
  if (caption) a.z = fuse_hadamard(a.z, *caption);
  return a;
}

// dW += (dz (*) c) x^T
inline void accumulate_adapter_grad(const AdaptedVector& a, const Vector& dz, LinearAdapter& dw) {
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const double g = a.caption ? dz[r] * (*a.caption)[r] : dz[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < dw.cols(); ++c) dw(r, c) += g * (*a.input)[c];
  }
}

}  // namespace detail

// Plain gradient descent on a linear adapter applied to the figure/GA side,
// starting from the identity. Deterministic for a given seed.
inline TrainResult train_adapter(const Corpus& corpus, const EmbeddingStore& store, const TrainConfig& cfg,
                                 Objective objective, bool fusion) {
  if (cfg.m == 0) throw ValidationError("m must be at least 1");
  if (cfg.batch_size == 0) throw ValidationError("batch size must be at least 1");
  if (!(cfg.lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  detail::check_tau(cfg.tau);
  const auto papers = detail::collect_train_papers(corpus, store, fusion);
  if (papers.empty()) throw ValidationError("train split has no papers with a GA to train on");
  if (objective == Objective::kInter && std::min(cfg.batch_size, papers.size()) < 2) {
    throw ValidationError("inter objective needs a batch of at least 2 papers");
  }

  TrainResult result{LinearAdapter::identity(store.dim()), {}};
  LinearAdapter& w = result.adapter;
  std::mt19937_64 gen(cfg.seed);
  const std::size_t dim = store.dim();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto chosen = detail::sample_without_replacement(gen, papers.size(), cfg.batch_size);
    LinearAdapter dw(dim, dim);
    double loss = 0.0;

    if (objective == Objective::kIntra) {
      LossBatch batch;
      batch.tau = cfg.tau;
      std::vector<detail::AdaptedVector> ga_side;
      std::vector<std::vector<detail::AdaptedVector>> fig_side;
      for (std::size_t idx : chosen) {
        const auto& p = papers[idx];
        const auto picks = detail::sample_without_replacement(gen, p.figures.size(), cfg.m);
        ga_side.push_back(detail::adapt(w, p.ga, fusion ? &p.ga_caption : nullptr));
        fig_side.emplace_back();
        std::vector<Vector> negs;
        std::vector<bool> valid;
        for (std::size_t slot = 0; slot < cfg.m; ++slot) {
          if (slot < picks.size()) {
            fig_side.back().push_back(
                detail::adapt(w, p.figures[picks[slot]], fusion ? &p.captions[picks[slot]] : nullptr));
            negs.push_back(fig_side.back().back().z);
            valid.push_back(true);
          } else {
            negs.emplace_back(dim, 0.0);
            valid.push_back(false);
          }
        }
        batch.queries.push_back(p.abstract);
        batch.positives.push_back(ga_side.back().z);
        batch.negatives.push_back(std::move(negs));
        batch.valid.push_back(std::move(valid));
      }
      const LossGrad g = info_nce_grad(batch);
      loss = g.loss;
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        detail::accumulate_adapter_grad(ga_side[i], g.d_positives[i], dw);
        for (std::size_t j = 0; j < fig_side[i].size(); ++j) {
          detail::accumulate_adapter_grad(fig_side[i][j], g.d_negatives[i][j], dw);
        }
      }
    } else {
      std::vector<Vector> abstracts;
      std::vector<detail::AdaptedVector> ga_side;
      for (std::size_t idx : chosen) {
        const auto& p = papers[idx];
        abstracts.push_back(p.abstract);
        ga_side.push_back(detail::adapt(w, p.ga, fusion ? &p.ga_caption : nullptr));
      }
      std::vector<Vector> gas;
      for (const auto& a : ga_side) gas.push_back(a.z);
      const InterGrad g = loss_inter_grad(abstracts, gas, cfg.tau);
      loss = g.loss;
      for (std::size_t i = 0; i < ga_side.size(); ++i) detail::accumulate_adapter_grad(ga_side[i], g.d_gas[i], dw);
    }

    result.trace.push_back(loss);
    if (cfg.lr > 0.0) {
      for (std::size_t i = 0; i < w.data().size(); ++i) w.data()[i] -= cfg.lr * dw.data()[i];
    }
  }
  return result;
}

}  // namespace garec
