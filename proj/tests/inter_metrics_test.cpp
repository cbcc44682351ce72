#include <catch_amalgamated.hpp>

#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "garec/inter_metrics.hpp"
#include "test_util.hpp"

using namespace garec;
using garec::testing::fixture;

namespace {

constexpr double kTol = 1e-12;

RankedList inter_list(const Corpus& c, const EmbeddingStore& s, const std::string& q) {
  return score_candidates({Method::kAbs2Fig}, build_candidates(c, q, Task::kInter), c, &s);
}

}  // namespace

TEST_CASE("sim_stats oracle value", "[inter]") {
  const SimStats s = sim_stats_at_k(Vector{1, 0, 1}, {Vector{1, 1, 0}, Vector{0, 1, 1}, Vector{2, 0, 1}});
  CHECK(std::abs(s.mean - 0.64956109935017126653) <= kTol);
  CHECK(std::abs(s.std - 0.21151133510444209781) <= kTol);
  CHECK(sim_stats_at_k(Vector{1, 0}, {Vector{2, 0}}).std == 0.0);
  CHECK_THROWS_WITH(sim_stats_at_k(Vector{1, 0}, {Vector{0, 0}}, {"abstract:p9"}),
                    Catch::Matchers::ContainsSubstring("abstract:p9"));
}

TEST_CASE("clip_score_pair", "[inter]") {
  CHECK(clip_score_pair(Vector{1, 0}, Vector{1, 0}) == 2.5);
  CHECK(clip_score_pair(Vector{1, 0}, Vector{-1, 0}) == 0.0);
  CHECK(clip_score_pair(Vector{1, 0}, Vector{-1, 0}, 2.5, false) == -2.5);
  CHECK(std::abs(clip_score_pair(Vector{1, 2, 3}, Vector{4, 5, 6}) - 2.5 * 0.97463184619707627108) <= kTol);
  CHECK_THROWS_AS(clip_score_pair(Vector{1}, Vector{1}, 0.0), ValidationError);
}

TEST_CASE("field precision", "[inter]") {
  const Corpus c = load_corpus(fixture("corpus6.jsonl"));
  RankedList l;
  l.query_paper_id = "p1";  // cs.CV
  for (const char* id : {"p4", "p5", "p6"}) l.entries.push_back({id, 0.0, true, l.entries.size()});
  CHECK(field_precision_at_k(l, 1, c, "p1") == 1.0);
  CHECK(field_precision_at_k(l, 2, c, "p1") == 0.5);
  CHECK(std::abs(field_precision_at_k(l, 5, c, "p1") - 2.0 / 3.0) <= kTol);
  CHECK(field_precision_at_k(l, 3, c, "p3") == Catch::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(field_precision_at_k(l, 0, c, "p1"), ValidationError);
}

TEST_CASE("evaluate_inter matches the fixture oracle", "[inter]") {
  const Corpus c = load_corpus(fixture("corpus6.jsonl"));
  const EmbeddingStore s = load_embeddings(fixture("embeddings6.tsv"));
  const auto expected = nlohmann::json::parse(read_file(fixture("e2e_expected.json")))["inter-abs2fig"];
  std::vector<InterRow> rows;
  for (const auto* p : c.in_split(Split::kTest)) {
    const RankedList l = inter_list(c, s, p->paper_id);
    const auto& ranking = expected["ranking"][p->paper_id];
    REQUIRE(l.entries.size() == ranking.size());
    for (std::size_t i = 0; i < l.entries.size(); ++i) {
      CHECK(l.entries[i].candidate_id == ranking[i][0].get<std::string>());
      CHECK(std::abs(l.entries[i].score - ranking[i][1].get<double>()) <= kTol);
    }
    const InterRow row = evaluate_inter(l, c, s, {});
    const auto& e = expected["rows"][p->paper_id];
    CHECK(std::abs(row.field_p - e["field_p_at_5"].get<double>()) <= kTol);
    CHECK(std::abs(row.abs2abs.mean - e["abs2abs_mean_5"].get<double>()) <= kTol);
    CHECK(std::abs(row.abs2abs.std - e["abs2abs_std_5"].get<double>()) <= kTol);
    REQUIRE(row.ga2ga);
    CHECK(std::abs(row.ga2ga->mean - e["ga2ga_mean_5"].get<double>()) <= kTol);
    CHECK(std::abs(row.ga2ga->std - e["ga2ga_std_5"].get<double>()) <= kTol);
    rows.push_back(row);
  }
  const InterMetricReport rep = aggregate_inter(rows, {});
  CHECK(std::abs(rep.mean_field_p - expected["aggregate"]["field_p_at_5"].get<double>()) <= kTol);
  CHECK(std::abs(rep.mean_ga2ga - expected["aggregate"]["ga2ga_mean_5"].get<double>()) <= kTol);
  CHECK(rep.ga2ga_skipped == 0);
  std::ostringstream os;
  write_inter_csv(os, rep);
  CHECK(os.str().rfind("query_id,field_p_at_5,abs2abs_mean_5,abs2abs_std_5,ga2ga_mean_5,ga2ga_std_5\n", 0) == 0);
}

TEST_CASE("a missing GA vector skips GA2GA for that query only", "[inter]") {
  const Corpus c = load_corpus(fixture("corpus6.jsonl"));
  const EmbeddingStore full = load_embeddings(fixture("embeddings6.tsv"));
  EmbeddingStore s(full.dim());
  for (const auto& k : full.keys()) {
    if (k != "ga:p5") s.add(k, *full.find(k));
  }
  // p5's GA figure f2 has no figure vector either, so p5 cannot be scored as a candidate.
  REQUIRE_FALSE(ga_vector(s, c.at("p5")));
  const RankedList l = inter_list(c, s, "p1");
  CHECK(l.unscored_count() == 1);
  const InterRow row = evaluate_inter(l, c, s, {});
  CHECK_FALSE(row.ga2ga);
  CHECK(aggregate_inter({row}, {}).ga2ga_skipped == 1);
  EmbeddingStore no_abs(full.dim());
  for (const auto& k : full.keys()) {
    if (k != "abstract:p4") no_abs.add(k, *full.find(k));
  }
  CHECK_THROWS_AS(evaluate_inter(inter_list(c, full, "p1"), c, no_abs, {}), MissingEmbeddingError);
}
