#include <catch_amalgamated.hpp>

#include <regex>
#include <sstream>
#include <unistd.h>

#include "garec/corpus.hpp"
#include "test_util.hpp"

using namespace garec;
using garec::testing::fixture;

namespace {

std::string record(const std::string& id, const std::string& category, const std::string& split,
                   const std::string& figures, const std::string& ga, const std::string& teaser = "null") {
  return R"({"paper_id":")" + id + R"(","title":"t","abstract":"a","primary_category":")" + category +
         R"(","split":")" + split + R"(","figures":)" + figures + R"(,"ga":)" + ga + R"(,"teaser_figure_id":)" +
         teaser + "}\n";
}

const std::string kThreeFigs =
    R"([{"figure_id":"f1","caption":"","subfigures":[],"is_ga_component":false},)"
    R"({"figure_id":"f2","caption":"","subfigures":[],"is_ga_component":false},)"
    R"({"figure_id":"f3","caption":"","subfigures":[],"is_ga_component":false}])";

std::string unescape(std::string s) {
  for (std::size_t pos; (pos = s.find("\\t")) != std::string::npos;) s.replace(pos, 2, "\t");
  return s;
}

// Independent reference for the tag pattern.
std::string regex_strip(std::string s) {
  static const std::regex tag(R"(^\s*(figure|fig\.|fig)\s*\d+[a-z]?(?![a-z0-9])[:.]?\s*)", std::regex::icase);
  std::smatch m;
  while (std::regex_search(s, m, tag, std::regex_constants::match_continuous)) {
    s = m.suffix();
  }
  return s;
}

}  // namespace

TEST_CASE("load_corpus reads the six-paper fixture", "[corpus]") {
  const Corpus c = load_corpus(fixture("corpus6.jsonl"));
  CHECK(c.size() == 6);
  CHECK(c.at("p2").figures.size() == 3);
  CHECK(c.at("p1").figures[1].subfigures.size() == 2);
  CHECK(c.in_split(Split::kTest).size() == 3);
  CHECK(c.at("p1").extra.contains("authors"));
  CHECK(c.at("p6").teaser_figure_id == "f1");
}

TEST_CASE("load is independent of record order", "[corpus]") {
  const std::string text = read_file(fixture("corpus6.jsonl"));
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  std::reverse(lines.begin(), lines.end());
  std::string reversed;
  for (const auto& l : lines) reversed += l + "\n";
  CHECK(load_corpus_text(reversed) == load_corpus_text(text));
}

TEST_CASE("array and keyed-object documents are accepted", "[corpus]") {
  const std::string arr = "[" + record("a", "cs.CV", "train", kThreeFigs, "null") + "," +
                          record("b", "cs.CV", "val", "[]", "null") + "]";
  CHECK(load_corpus_text(arr).size() == 2);
  const std::string keyed = R"({"x1":{"title":"t","primary_category":"cs.CL","split":"test",)"
                            R"("figures":{"f1":{"caption":"c","subfigures":{"a":{"caption":"s"}}}}}})";
  const Corpus c = load_corpus_text(keyed);
  REQUIRE(c.size() == 1);
  CHECK(c.at("x1").figures.at(0).figure_id == "f1");
  CHECK(c.at("x1").figures.at(0).subfigures.at(0).subfigure_id == "a");
}

TEST_CASE("validation errors", "[corpus]") {
  SECTION("GA naming no figure") {
    const auto t = record("a", "cs.CV", "train", kThreeFigs,
                          R"({"ga_figure_id":"f9","ga_type":"Original","component_figure_ids":[]})");
    REQUIRE_THROWS_AS(load_corpus_text(t), ValidationError);
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("f9"));
  }
  SECTION("Reuse with two components") {
    const auto t = record("a", "cs.CV", "train", kThreeFigs,
                          R"({"ga_figure_id":"f1","ga_type":"Reuse","component_figure_ids":["f1","f2"]})");
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("Reuse"));
  }
  SECTION("duplicate paper id") {
    const auto t = record("a", "cs.CV", "train", "[]", "null") + record("a", "cs.CV", "val", "[]", "null");
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("duplicate paper_id"));
  }
  SECTION("unknown split") {
    const auto t = record("a", "cs.CV", "dev", "[]", "null");
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("split"));
  }
  SECTION("parse failure names the line") {
    const auto t = record("a", "cs.CV", "train", "[]", "null") + "{\"paper_id\": oops\n";
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("wrong field type names the field") {
    const auto t = R"({"paper_id":"a","primary_category":"cs.CV","split":"train","title":5})";
    REQUIRE_THROWS_WITH(load_corpus_text(t), Catch::Matchers::ContainsSubstring("'title'"));
  }
  SECTION("duplicate subfigure id") {
    const auto figs = R"([{"figure_id":"f1","caption":"","subfigures":[{"subfigure_id":"a","caption":""},)"
                      R"({"subfigure_id":"a","caption":""}],"is_ga_component":false}])";
    REQUIRE_THROWS_WITH(load_corpus_text(record("a", "cs.CV", "train", figs, "null")),
                        Catch::Matchers::ContainsSubstring("subfigure"));
  }
}

TEST_CASE("round trip preserves every field, including unknown ones", "[corpus][property]") {
  const Corpus c = load_corpus(fixture("corpus6.jsonl"));
  std::ostringstream once;
  write_corpus(once, c);
  const Corpus again = load_corpus_text(once.str());
  CHECK(again == c);
  std::ostringstream twice;
  write_corpus(twice, again);
  CHECK(twice.str() == once.str());
  CHECK(once.str().find("\"authors\":[\"A. Author\",\"B. Author\"]") != std::string::npos);
}

TEST_CASE("strip_caption_tags examples", "[corpus]") {
  CHECK(strip_caption_tags("Figure 1: Overview of the model.") == "Overview of the model.");
  CHECK(strip_caption_tags("Overview of the model.") == "Overview of the model.");
  CHECK(strip_caption_tags("") == "");
}

TEST_CASE("strip_caption_tags agrees with the hand labels and a regex reference", "[corpus]") {
  std::ifstream in(fixture("captions50.tsv"));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const std::string input = unescape(line.substr(0, tab));
    const std::string label = unescape(line.substr(tab + 1));
    INFO(input);
    CHECK(regex_strip(input) == label);
    CHECK(strip_caption_tags(input) == label);
    ++n;
  }
  CHECK(n == 50);
}

TEST_CASE("strip_caption_tags is idempotent on fuzzed captions", "[corpus][property]") {
  std::mt19937_64 gen(7);
  const std::vector<std::string> parts{"Figure", "Fig.", "fig", " ", "1", "2a", ":", ".", "x", "ab", "Fig 3", "\t", "é"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const int len = static_cast<int>(gen() % 8);
    for (int i = 0; i < len; ++i) s += parts[gen() % parts.size()];
    const std::string once = strip_caption_tags(s);
    INFO(s);
    CHECK(strip_caption_tags(once) == once);
    CHECK(regex_strip(s) == once);
  }
}

TEST_CASE("strip_special_tokens", "[corpus]") {
  CHECK(strip_special_tokens("loss <MATH>L_C</MATH> value", SpecialTokenMode::kDrop) == "loss  value");
  CHECK(strip_special_tokens("loss <MATH>L_C</MATH> value", SpecialTokenMode::kKeepContent) == "loss L_C value");
  CHECK(strip_special_tokens("a <NOTE>n <TAG>t</TAG></NOTE> b", SpecialTokenMode::kDrop) == "a  b");
  CHECK(strip_special_tokens("a <NOTE>n <TAG>t</TAG></NOTE> b", SpecialTokenMode::kKeepContent) == "a n t b");
  CHECK(strip_special_tokens("x < y", SpecialTokenMode::kDrop) == "x < y");
  REQUIRE_THROWS_WITH(strip_special_tokens("a <MATH>b", SpecialTokenMode::kDrop),
                      Catch::Matchers::ContainsSubstring("<MATH>"));
  REQUIRE_THROWS_WITH(strip_special_tokens("a </TAG> b", SpecialTokenMode::kDrop),
                      Catch::Matchers::ContainsSubstring("</TAG>"));
  REQUIRE_THROWS_AS(strip_special_tokens("<MATH><NOTE></MATH></NOTE>", SpecialTokenMode::kKeepContent),
                    ValidationError);
}

TEST_CASE("compute_stats", "[corpus]") {
  SECTION("figures with and without subfigures") {
    const auto figs = R"([{"figure_id":"f1","caption":"one two","subfigures":[],"is_ga_component":false},)"
                      R"({"figure_id":"f2","caption":"x","subfigures":[{"subfigure_id":"a","caption":""},)"
                      R"({"subfigure_id":"b","caption":""}],"is_ga_component":false},)"
                      R"({"figure_id":"f3","caption":"<MATH>z</MATH> a b c","subfigures":[],"is_ga_component":false}])";
    const CorpusStats st = compute_stats(load_corpus_text(record("a", "cs.CV", "train", figs, "null")));
    CHECK(st.figures_per_paper.mean == 3.0);
    CHECK(st.figures_per_paper_with_subfigures.mean == 4.0);
    CHECK(st.caption_tokens.max == 3.0);
    CHECK(st.caption_tokens.mean == Catch::Approx(2.0));
  }
  SECTION("category histogram and split filter") {
    const Corpus c = load_corpus(fixture("corpus6.jsonl"));
    const CorpusStats st = compute_stats(c);
    CHECK(st.category_counts == std::map<std::string, std::size_t>{{"cs.CL", 2}, {"cs.CV", 4}});
    std::size_t total = 0;
    for (const auto& [k, v] : st.category_counts) total += v;
    CHECK(total == st.paper_count);
    const CorpusStats test = compute_stats(c, Split::kTest);
    CHECK(test.paper_count == 3);
    const CorpusStats val = compute_stats(c, Split::kVal);
    CHECK(val.paper_count == 0);
    CHECK(val.abstract_tokens.mean == 0.0);
    CHECK(val.figures_per_paper.std == 0.0);
    CHECK(val.category_counts.empty());
  }
}

TEST_CASE("ground_truth_set policies", "[corpus]") {
  const std::string reuse = R"({"ga_figure_id":"f1","ga_type":"Reuse","component_figure_ids":["f2"]})";
  const std::string orig = R"({"ga_figure_id":"f3","ga_type":"Original","component_figure_ids":[]})";
  const Corpus c = load_corpus_text(record("r", "cs.CV", "train", kThreeFigs, reuse) +
                                    record("o", "cs.CV", "train", kThreeFigs, orig) +
                                    record("n", "cs.CV", "train", kThreeFigs, "null") +
                                    record("t", "cs.CV", "train", kThreeFigs, "null", "\"f2\""));
  CHECK(ground_truth_set(c.at("r"), GtPolicy::kComponents) == std::set<std::string>{"f2"});
  CHECK(ground_truth_set(c.at("r"), GtPolicy::kGaOnly) == std::set<std::string>{"f1"});
  CHECK(ground_truth_set(c.at("o"), GtPolicy::kComponents) == std::set<std::string>{"f3"});
  CHECK(ground_truth_set(c.at("t"), GtPolicy::kTeaserFallback) == std::set<std::string>{"f2"});
  CHECK_THROWS_AS(ground_truth_set(c.at("t"), GtPolicy::kGaOnly), NoGroundTruthError);
  CHECK_THROWS_AS(ground_truth_set(c.at("n"), GtPolicy::kTeaserFallback), NoGroundTruthError);
  for (auto policy : {GtPolicy::kGaOnly, GtPolicy::kComponents, GtPolicy::kTeaserFallback}) {
    for (const auto& p : c.papers()) {
      std::set<std::string> gt;
      try {
        gt = ground_truth_set(p, policy);
      } catch (const NoGroundTruthError&) {
        continue;
      }
      CHECK_FALSE(gt.empty());
    }
  }
}
