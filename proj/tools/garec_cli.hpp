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

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "garec/contrastive.hpp"
#include "garec/corpus.hpp"
#include "garec/detail/format.hpp"
#include "garec/detail/parallel.hpp"
#include "garec/embed_store.hpp"
#include "garec/inter_metrics.hpp"
#include "garec/metrics.hpp"
#include "garec/retrieval.hpp"

namespace garec::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInternal = 1, kInvalidInput = 2, kMissingEmbedding = 3 };

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

// SOURCE_DATE_EPOCH, when set, pins the clock for reproducible manifests.
inline std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    long long v = 0;
    if (garec::detail::parse_number(std::string_view(epoch), v)) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Written next to a run's outputs; enough to replay it.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv) : started_(utc_now()) {
    doc_["tool"] = "garec";
    doc_["version"] = kVersion;
    doc_["command"] = std::move(command);
    doc_["argv"] = argv;
    doc_["config"] = json::object();
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  json& config() { return doc_["config"]; }
  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = value; }
  void input(const std::string& role, const std::string& path) {
    doc_["inputs"].push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  }
  void output(const std::string& path) { doc_["outputs"].push_back(fs::path(path).filename().string()); }

  void write(const std::string& path) {
    doc_["started_at"] = started_;
    doc_["finished_at"] = utc_now();
    std::ofstream out(path);
    out << doc_.dump(2) << '\n';
  }

 private:
  std::string started_;
  json doc_;
};

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

inline std::string alpha_suffix(const std::vector<double>& alphas, double alpha) {
  return alphas.size() > 1 ? "_alpha" + detail::format_double(alpha) : "";
}

struct Options {
  // global
  std::vector<double> alphas{0.5};
  std::vector<std::size_t> ks{1, 5, 10};
  double tau = kDefaultTemperature;
  std::optional<std::uint64_t> seed;
  unsigned jobs = detail::default_jobs();

  // ingest / stats
  std::string input, output;
  std::string split;

  // shared
  std::string corpus, embeddings, adapter, out, out_dir;
  std::string task = "intra";
  std::string method;
  std::string query_split = "test";
  std::string reference_split = "train";
  std::string gt_policy = "ga-only";
  bool no_lexical_subfigures = false;

  // eval
  std::string scores;
  std::size_t at = 5;
  std::string zscore_scope = "topk";
  double clip_weight = kClipScoreWeight;
  bool no_clip_clamp = false;

  // train
  std::string objective = "intra";
  bool fusion = false;
  std::size_t m = 4, batch = 8, steps = 200;
  double lr = 0.1;
};

inline Split require_split(const std::string& s) {
  auto v = parse_split(s);
  if (!v) throw ValidationError("unknown split '" + s + "'");
  return *v;
}

inline GtPolicy require_policy(const std::string& s) {
  auto v = parse_gt_policy(s);
  if (!v) throw ValidationError("unknown ground-truth policy '" + s + "'");
  return *v;
}

inline Task require_task(const std::string& s) {
  auto v = parse_task(s);
  if (!v) throw ValidationError("unknown task '" + s + "'");
  return *v;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  ParseResult parsed = parse_corpus_text(read_file(o.input));
  std::vector<RecordError> errors = std::move(parsed.errors);
  std::optional<Corpus> corpus;
  if (errors.empty()) {
    try {
      corpus = Corpus::from_records(std::move(parsed.records));
    } catch (const ValidationError& e) {
      errors.push_back({"corpus", e.what()});
    }
  }
  if (!errors.empty()) {
    err << "garec ingest: " << errors.size() << " invalid record(s) in " << o.input << "\n";
    for (const auto& e : errors) err << "  " << e.message << "\n";
    return kInvalidInput;
  }
  auto f = open_out(o.output);
  write_corpus(f, *corpus);
  std::size_t with_ga = 0, teaser_only = 0, no_gt = 0;
  for (const auto& p : corpus->papers()) {
    if (p.ga) ++with_ga;
    else if (p.teaser_figure_id) ++teaser_only;
    else ++no_gt;
  }
  out << "papers: " << corpus->size() << " (with GA " << with_ga << ", teaser only " << teaser_only
      << ", no ground truth " << no_gt << ")\n";
  return kOk;
}

inline int cmd_stats(const Options& o, std::ostream& out) {
  const Corpus corpus = load_corpus(o.input);
  std::optional<Split> split;
  if (!o.split.empty()) split = require_split(o.split);
  const std::string text = to_json(compute_stats(corpus, split)).dump(2) + "\n";
  if (o.output.empty()) {
    out << text;
  } else {
    auto f = open_out(o.output);
    f << text;
  }
  return kOk;
}

inline int cmd_score(const Options& o, const std::vector<std::string>& argv, std::ostream& err) {
  const auto method = parse_method(o.method);
  if (!method) throw ValidationError("unknown method '" + o.method + "'");
  const Task task = require_task(o.task);
  const Split query_split = require_split(o.query_split);
  const Split reference_split = require_split(o.reference_split);
  const GtPolicy policy = require_policy(o.gt_policy);

  MethodConfig cfg;
  cfg.method = *method;
  cfg.seed = o.seed;
  cfg.lexical_subfigures = !o.no_lexical_subfigures;
  if (cfg.method == Method::kRandom && !cfg.seed) throw ValidationError("method random requires --seed");

  Manifest manifest("score", argv);
  const Corpus corpus = load_corpus(o.corpus);
  manifest.input("corpus", o.corpus);
  std::optional<EmbeddingStore> store;
  if (uses_embeddings(cfg.method)) {
    if (o.embeddings.empty()) throw MissingEmbeddingError("--embeddings is required for " + o.method);
    store = load_embeddings(o.embeddings);
    manifest.input("embeddings", o.embeddings);
  }
  if (!o.adapter.empty()) {
    cfg.adapter = adapter_from_store(load_embeddings(o.adapter));
    manifest.input("adapter", o.adapter);
  }

  std::vector<CandidateSet> sets;
  std::size_t skipped = 0;
  for (const PaperRecord* p : corpus.in_split(query_split)) {
    try {
      sets.push_back(build_candidates(corpus, p->paper_id, task, reference_split, policy));
    } catch (const NoGroundTruthError&) {
      ++skipped;
    }
  }
  if (skipped) err << "garec score: skipped " << skipped << " paper(s) without ground truth\n";

  std::optional<IdfTable> idf;
  if (cfg.method == Method::kCider) {
    idf = build_caption_idf(corpus.in_split(task == Task::kIntra ? query_split : reference_split));
  }

  std::vector<RankedList> lists(sets.size());
  detail::parallel_for(sets.size(), o.jobs, [&](std::size_t i) {
    lists[i] = score_candidates(cfg, sets[i], corpus, store ? &*store : nullptr, idf ? &*idf : nullptr);
  });

  std::size_t unscored = 0;
  auto f = open_out(o.out);
  write_score_header(f);
  for (const auto& l : lists) {
    write_scores(f, l);
    unscored += l.unscored_count();
  }
  if (unscored) err << "garec score: " << unscored << " candidate(s) had no usable score and were ranked last\n";

  manifest.config() = {{"task", o.task},           {"method", o.method},
                       {"query_split", o.query_split}, {"reference_split", o.reference_split},
                       {"gt_policy", o.gt_policy},  {"lexical_subfigures", cfg.lexical_subfigures},
                       {"queries", lists.size()},   {"skipped_no_gt", skipped},
                       {"unscored_candidates", unscored}};
  if (o.seed) manifest.seed("random", *o.seed);
  manifest.output(o.out);
  manifest.write(o.out + ".manifest.json");
  return kOk;
}

inline int cmd_eval(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  const Task task = require_task(o.task);
  Manifest manifest("eval", argv);
  const Corpus corpus = load_corpus(o.corpus);
  manifest.input("corpus", o.corpus);
  std::vector<RankedList> lists;
  {
    std::ifstream in(o.scores, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + o.scores + "'");
    lists = read_scores(in);
  }
  manifest.input("scores", o.scores);
  if (lists.empty()) throw ValidationError("score file has no rows");
  fs::create_directories(o.out_dir);
  const std::string dir = o.out_dir + "/";

  if (task == Task::kIntra) {
    const GtPolicy policy = require_policy(o.gt_policy);
    auto scope = parse_zscore_scope(o.zscore_scope);
    if (!scope) throw ValidationError("unknown --zscore-scope '" + o.zscore_scope + "'");
    std::vector<std::set<std::string>> gts;
    for (const auto& l : lists) {
      const PaperRecord* p = corpus.find(l.query_paper_id);
      if (!p) throw ValidationError("score query '" + l.query_paper_id + "' is not in the corpus");
      gts.push_back(ground_truth_set(*p, policy));
    }
    for (double alpha : o.alphas) {
      CarConfig car{o.at, alpha, *scope};
      std::vector<IntraRow> rows(lists.size());
      detail::parallel_for(lists.size(), o.jobs,
                           [&](std::size_t i) { rows[i] = evaluate_intra(lists[i], gts[i], o.ks, car); });
      const IntraMetricReport report = aggregate_intra(std::move(rows), o.ks, o.at, alpha);
      const std::string sfx = alpha_suffix(o.alphas, alpha);
      {
        auto f = open_out(dir + "intra_report" + sfx + ".csv");
        write_intra_csv(f, report);
        auto j = open_out(dir + "intra_summary" + sfx + ".json");
        j << to_json(report).dump(2) << '\n';
        auto h = open_out(dir + "car_histogram" + sfx + ".csv");
        write_car_histogram_csv(h, report);
      }
      manifest.output(dir + "intra_report" + sfx + ".csv");
      manifest.output(dir + "intra_summary" + sfx + ".json");
      manifest.output(dir + "car_histogram" + sfx + ".csv");
      out << "alpha " << detail::format_double(alpha) << ": queries " << report.rows.size() << ", MRR "
          << detail::format_double(report.mean_mrr) << ", CAR@" << o.at << " " << detail::format_double(report.mean_car)
          << " (>0.5: " << detail::format_double(report.car_above_half) << ")\n";
    }
  } else {
    if (o.embeddings.empty()) throw MissingEmbeddingError("--embeddings is required for inter evaluation");
    const EmbeddingStore store = load_embeddings(o.embeddings);
    manifest.input("embeddings", o.embeddings);
    InterConfig cfg{o.at, o.clip_weight, !o.no_clip_clamp};
    std::vector<InterRow> rows(lists.size());
    detail::parallel_for(lists.size(), o.jobs,
                         [&](std::size_t i) { rows[i] = evaluate_inter(lists[i], corpus, store, cfg); });
    const InterMetricReport report = aggregate_inter(std::move(rows), cfg);
    {
      auto f = open_out(dir + "inter_report.csv");
      write_inter_csv(f, report);
      auto j = open_out(dir + "inter_summary.json");
      j << to_json(report).dump(2) << '\n';
    }
    manifest.output(dir + "inter_report.csv");
    manifest.output(dir + "inter_summary.json");
    out << "queries " << report.rows.size() << ", Field-P@" << o.at << " " << detail::format_double(report.mean_field_p)
        << ", GA2GA skipped " << report.ga2ga_skipped << "\n";
  }
  manifest.config() = {{"task", o.task},
                       {"k", o.ks},
                       {"at", o.at},
                       {"alpha", o.alphas},
                       {"zscore_scope", o.zscore_scope},
                       {"gt_policy", o.gt_policy},
                       {"clip_weight", o.clip_weight},
                       {"clip_clamp", !o.no_clip_clamp}};
  manifest.write(dir + "manifest.json");
  return kOk;
}

inline int cmd_train(const Options& o, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("train", argv);
  const Corpus corpus = load_corpus(o.corpus);
  manifest.input("corpus", o.corpus);
  const EmbeddingStore store = load_embeddings(o.embeddings);
  manifest.input("embeddings", o.embeddings);
  Objective objective;
  if (o.objective == "intra") objective = Objective::kIntra;
  else if (o.objective == "inter") objective = Objective::kInter;
  else throw ValidationError("unknown objective '" + o.objective + "'");

  TrainConfig cfg{o.m, o.batch, o.steps, o.lr, o.seed.value_or(0), o.tau};
  const TrainResult result = train_adapter(corpus, store, cfg, objective, o.fusion);

  fs::create_directories(o.out_dir);
  const std::string dir = o.out_dir + "/";
  save_embeddings(dir + "adapter.sgem", adapter_to_store(result.adapter));
  {
    auto f = open_out(dir + "loss_trace.csv");
    f << "step,loss\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i) f << i << ',' << detail::format_double(result.trace[i]) << '\n';
  }
  manifest.output(dir + "adapter.sgem");
  manifest.output(dir + "loss_trace.csv");
  manifest.config() = {{"objective", o.objective}, {"fusion", o.fusion}, {"m", o.m},     {"batch", o.batch},
                       {"steps", o.steps},         {"lr", o.lr},         {"tau", o.tau}};
  manifest.seed("train", cfg.seed);
  manifest.write(dir + "manifest.json");
  if (!result.trace.empty()) {
    out << "loss " << detail::format_double(result.trace.front()) << " -> " << detail::format_double(result.trace.back())
        << " over " << result.trace.size() << " steps\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"garec: graphical-abstract recommendation scoring and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  app.add_option("--alpha", o.alphas, "Confidence threshold fraction(s), comma separated")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--k", o.ks, "Cutoffs for R@k, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
  app.add_option("--tau", o.tau, "InfoNCE temperature")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Seed for random scoring and training");
  app.add_option("--jobs", o.jobs, "Worker threads for per-query work")->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write its canonical form");
  ingest->add_option("input", o.input)->required()->check(CLI::ExistingFile);
  ingest->add_option("output", o.output)->required();

  auto* stats = app.add_subcommand("stats", "Corpus statistics as JSON");
  stats->add_option("corpus", o.input)->required()->check(CLI::ExistingFile);
  stats->add_option("--split", o.split, "Restrict to one split");
  stats->add_option("--out", o.output, "Write JSON here instead of stdout");

  auto* score = app.add_subcommand("score", "Rank candidates and dump the score matrix");
  score->add_option("--corpus", o.corpus)->required()->check(CLI::ExistingFile);
  score->add_option("--task", o.task)->check(CLI::IsMember({"intra", "inter"}));
  score->add_option("--method", o.method)
      ->required()
      ->check(CLI::IsMember({"abs2cap-rougeL", "abs2cap-bm25", "abs2cap-cider", "abs2fig", "abs2fig-cap", "random",
                             "rougeL", "bm25", "cider"}));
  score->add_option("--embeddings", o.embeddings)->check(CLI::ExistingFile);
  score->add_option("--adapter", o.adapter, "Adapter file from `garec train`")->check(CLI::ExistingFile);
  score->add_option("--query-split", o.query_split);
  score->add_option("--reference-split", o.reference_split, "Inter candidate pool");
  score->add_option("--gt-policy", o.gt_policy)->check(CLI::IsMember({"ga-only", "components", "teaser-fallback"}));
  score->add_flag("--no-lexical-subfigures", o.no_lexical_subfigures);
  score->add_option("--out", o.out)->required();

  auto* eval = app.add_subcommand("eval", "Compute metric reports from a score matrix");
  eval->add_option("--task", o.task)->check(CLI::IsMember({"intra", "inter"}));
  eval->add_option("--scores", o.scores)->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", o.corpus)->required()->check(CLI::ExistingFile);
  eval->add_option("--embeddings", o.embeddings, "Abstract/GA vectors (inter)")->check(CLI::ExistingFile);
  eval->add_option("--at", o.at, "Cutoff for CAR, nDCG and the inter metrics")->check(CLI::PositiveNumber);
  eval->add_option("--zscore-scope", o.zscore_scope)->check(CLI::IsMember({"topk", "full"}));
  eval->add_option("--gt-policy", o.gt_policy)->check(CLI::IsMember({"ga-only", "components", "teaser-fallback"}));
  eval->add_option("--clip-weight", o.clip_weight)->check(CLI::PositiveNumber);
  eval->add_flag("--no-clip-clamp", o.no_clip_clamp);
  eval->add_option("--out-dir", o.out_dir)->required();

  auto* train = app.add_subcommand("train", "Fit a linear adapter on frozen embeddings");
  train->add_option("--corpus", o.corpus)->required()->check(CLI::ExistingFile);
  train->add_option("--embeddings", o.embeddings)->required()->check(CLI::ExistingFile);
  train->add_option("--objective", o.objective)->check(CLI::IsMember({"intra", "inter"}));
  train->add_flag("--fusion", o.fusion, "Hadamard-fuse caption vectors into the figure side");
  train->add_option("--m", o.m)->check(CLI::PositiveNumber);
  train->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  train->add_option("--steps", o.steps);
  train->add_option("--lr", o.lr)->check(CLI::NonNegativeNumber);
  train->add_option("--out-dir", o.out_dir)->required();

  for (auto* sub : {ingest, stats, score, eval, train}) sub->fallthrough();

  std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "garec: " << e.what() << "\n";
    return kInvalidInput;
  }

  try {
    if (*ingest) return cmd_ingest(o, out, err);
    if (*stats) return cmd_stats(o, out);
    if (*score) return cmd_score(o, args, err);
    if (*eval) return cmd_eval(o, args, out);
    if (*train) return cmd_train(o, args, out);
  } catch (const MissingEmbeddingError& e) {
    err << "garec: " << e.what() << "\n";
    return kMissingEmbedding;
  } catch (const ValidationError& e) {
    err << "garec: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "garec: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace garec::cli
