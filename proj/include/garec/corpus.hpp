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
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "garec/error.hpp"

namespace garec {

using ordered_json = nlohmann::ordered_json;

enum class Split { kTrain, kVal, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

enum class GaType { kOriginal, kReuse, kModified };

inline std::string_view to_string(GaType t) {
  switch (t) {
    case GaType::kOriginal: return "Original";
    case GaType::kReuse: return "Reuse";
    case GaType::kModified: return "Modified";
  }
  return "?";
}

inline std::optional<GaType> parse_ga_type(std::string_view s) {
  if (s == "Original") return GaType::kOriginal;
  if (s == "Reuse") return GaType::kReuse;
  if (s == "Modified") return GaType::kModified;
  return std::nullopt;
}

struct SubfigureRecord {
  std::string subfigure_id;
  std::string caption;
  ordered_json extra = ordered_json::object();

  bool operator==(const SubfigureRecord&) const = default;
};

struct FigureRecord {
  std::string figure_id;
  std::string caption;
  std::vector<SubfigureRecord> subfigures;
  bool is_ga_component = false;
  ordered_json extra = ordered_json::object();

  bool operator==(const FigureRecord&) const = default;
};

struct GaRecord {
  std::string ga_figure_id;
  GaType ga_type = GaType::kOriginal;
  std::vector<std::string> component_figure_ids;
  ordered_json extra = ordered_json::object();

  bool operator==(const GaRecord&) const = default;
};

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract;
  std::string primary_category;
  Split split = Split::kTrain;
  std::vector<FigureRecord> figures;
  std::optional<GaRecord> ga;
  std::optional<std::string> teaser_figure_id;
  // Fields outside the typed schema (authors, section trees, ...), kept in
  // their original order so re-serialization reproduces them.
  ordered_json extra = ordered_json::object();

  const FigureRecord* find_figure(std::string_view id) const {
    for (const auto& f : figures) {
      if (f.figure_id == id) return &f;
    }
    return nullptr;
  }

  bool operator==(const PaperRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Text preprocessing
// ---------------------------------------------------------------------------

namespace detail {

inline bool ieq_prefix(std::string_view s, std::size_t pos, std::string_view word) {
  if (s.size() - pos < word.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i]) return false;
  }
  return true;
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Length of a leading figure tag at `text`, or 0 when there is none.
inline std::size_t figure_tag_length(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && is_space(text[i])) ++i;
  std::size_t after_word = 0;
  if (ieq_prefix(text, i, "figure")) {
    after_word = i + 6;
  } else if (ieq_prefix(text, i, "fig.")) {
    after_word = i + 4;
  } else if (ieq_prefix(text, i, "fig")) {
    after_word = i + 3;
  } else {
    return 0;
  }
  std::size_t j = after_word;
  while (j < text.size() && is_space(text[j])) ++j;
  const std::size_t digits_begin = j;
  while (j < text.size() && is_digit(text[j])) ++j;
  if (j == digits_begin) return 0;
  if (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
  if (j < text.size() && is_alnum(text[j])) return 0;
  if (j < text.size() && (text[j] == ':' || text[j] == '.')) ++j;
  while (j < text.size() && is_space(text[j])) ++j;
  return j;
}

}  // namespace detail

// Removes leading "Figure 3:", "Fig. 2a.", "fig 7 " style tags. Repeated
// tags are all removed so the operation is idempotent.
inline std::string strip_caption_tags(std::string_view caption) {
  std::string_view rest = caption;
  bool stripped = false;
  while (std::size_t n = detail::figure_tag_length(rest)) {
    rest.remove_prefix(n);
    stripped = true;
  }
  if (!stripped) return std::string(caption);
  return std::string(rest);
}

enum class SpecialTokenMode { kDrop, kKeepContent };

// Handles <MATH>, <NOTE> and <TAG> spans, which may nest. Throws
// ValidationError naming the offending token when delimiters do not balance.
inline std::string strip_special_tokens(std::string_view text, SpecialTokenMode mode) {
  static constexpr std::string_view kNames[] = {"MATH", "NOTE", "TAG"};
  std::string out;
  out.reserve(text.size());
  std::vector<std::string_view> open;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      bool matched = false;
      for (auto name : kNames) {
        const std::size_t open_len = name.size() + 2;
        const std::size_t close_len = name.size() + 3;
        if (text.compare(i, open_len, std::string("<") + std::string(name) + ">") == 0) {
          open.push_back(name);
          i += open_len;
          matched = true;
          break;
        }
        if (text.compare(i, close_len, std::string("</") + std::string(name) + ">") == 0) {
          if (open.empty() || open.back() != name) {
            throw ValidationError("unbalanced special token </" + std::string(name) + ">");
          }
          open.pop_back();
          i += close_len;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (mode == SpecialTokenMode::kKeepContent || open.empty()) out += text[i];
    ++i;
  }
  if (!open.empty()) {
    throw ValidationError("unbalanced special token <" + std::string(open.back()) + ">");
  }
  return out;
}

inline std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    const std::size_t begin = i;
    while (i < text.size() && !detail::is_space(text[i])) ++i;
    if (i > begin) tokens.push_back(text.substr(begin, i - begin));
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

class Corpus {
 public:
  Corpus() = default;

  // Validates the records and sorts them by paper_id, so a corpus does not
  // depend on the order records appeared in the source file.
  static Corpus from_records(std::vector<PaperRecord> records);

  std::size_t size() const { return papers_.size(); }
  bool empty() const { return papers_.empty(); }
  const std::vector<PaperRecord>& papers() const { return papers_; }

  const PaperRecord* find(std::string_view paper_id) const {
    auto it = index_.find(std::string(paper_id));
    return it == index_.end() ? nullptr : &papers_[it->second];
  }

  const PaperRecord& at(std::string_view paper_id) const {
    const PaperRecord* p = find(paper_id);
    if (!p) throw ValidationError("unknown paper_id '" + std::string(paper_id) + "'");
    return *p;
  }

  std::vector<const PaperRecord*> in_split(Split split) const {
    std::vector<const PaperRecord*> out;
    for (const auto& p : papers_) {
      if (p.split == split) out.push_back(&p);
    }
    return out;
  }

  bool operator==(const Corpus& other) const { return papers_ == other.papers_; }

 private:
  std::vector<PaperRecord> papers_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline void validate_record(const PaperRecord& p) {
  const std::string where = "paper '" + p.paper_id + "'";
  if (p.paper_id.empty()) throw ValidationError("record with empty paper_id");
  std::unordered_set<std::string> figure_ids;
  for (const auto& f : p.figures) {
    if (f.figure_id.empty()) throw ValidationError(where + ": figure with empty figure_id");
    if (!figure_ids.insert(f.figure_id).second) {
      throw ValidationError(where + ": duplicate figure_id '" + f.figure_id + "'");
    }
    std::unordered_set<std::string> sub_ids;
    for (const auto& s : f.subfigures) {
      if (s.subfigure_id.empty()) {
        throw ValidationError(where + ": figure '" + f.figure_id + "' has a subfigure with empty id");
      }
      if (!sub_ids.insert(s.subfigure_id).second) {
        throw ValidationError(where + ": figure '" + f.figure_id + "' has duplicate subfigure_id '" +
                              s.subfigure_id + "'");
      }
    }
  }
  if (p.ga) {
    if (!figure_ids.count(p.ga->ga_figure_id)) {
      throw ValidationError(where + ": ga.ga_figure_id '" + p.ga->ga_figure_id +
                            "' names no figure of this paper");
    }
    for (const auto& c : p.ga->component_figure_ids) {
      if (!figure_ids.count(c)) {
        throw ValidationError(where + ": ga.component_figure_ids entry '" + c +
                              "' names no figure of this paper");
      }
    }
    if (p.ga->ga_type == GaType::kReuse && p.ga->component_figure_ids.size() != 1) {
      throw ValidationError(where + ": ga.ga_type Reuse requires exactly one component figure, got " +
                            std::to_string(p.ga->component_figure_ids.size()));
    }
  }
  if (p.teaser_figure_id && !figure_ids.count(*p.teaser_figure_id)) {
    throw ValidationError(where + ": teaser_figure_id '" + *p.teaser_figure_id +
                          "' names no figure of this paper");
  }
}

inline Corpus Corpus::from_records(std::vector<PaperRecord> records) {
  Corpus c;
  std::sort(records.begin(), records.end(),
            [](const PaperRecord& a, const PaperRecord& b) { return a.paper_id < b.paper_id; });
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i]);
    if (i > 0 && records[i].paper_id == records[i - 1].paper_id) {
      throw ValidationError("duplicate paper_id '" + records[i].paper_id + "'");
    }
  }
  c.papers_ = std::move(records);
  for (std::size_t i = 0; i < c.papers_.size(); ++i) c.index_.emplace(c.papers_[i].paper_id, i);
  return c;
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

class FieldReader {
 public:
  FieldReader(const ordered_json& obj, std::string context) : obj_(obj), context_(std::move(context)) {
    if (!obj_.is_object()) fail("", "expected a JSON object");
  }

  [[noreturn]] void fail(std::string_view field, std::string_view msg) const {
    std::string where = context_;
    if (!field.empty()) where += ", field '" + std::string(field) + "'";
    throw ValidationError(where + ": " + std::string(msg));
  }

  const ordered_json* get(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    return &*it;
  }

  std::string string(std::string_view key, bool required) {
    const ordered_json* v = get(key);
    if (!v || v->is_null()) {
      if (required) fail(key, "missing required string");
      return {};
    }
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::optional<std::string> optional_string(std::string_view key) {
    const ordered_json* v = get(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_string()) fail(key, "expected a string or null");
    return v->get<std::string>();
  }

  bool boolean(std::string_view key, bool fallback) {
    const ordered_json* v = get(key);
    if (!v || v->is_null()) return fallback;
    if (!v->is_boolean()) fail(key, "expected a boolean");
    return v->get<bool>();
  }

  // Unknown members in source order.
  ordered_json rest() const {
    ordered_json extra = ordered_json::object();
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) extra[it.key()] = it.value();
    }
    return extra;
  }

  const std::string& context() const { return context_; }

 private:
  const ordered_json& obj_;
  std::string context_;
  std::set<std::string> seen_;
};

// Accepts either an array of objects or an object keyed by id, which is how
// nested exports lay out figures and subfigures.
template <typename Fn>
void for_each_member(const ordered_json& v, FieldReader& r, std::string_view field, Fn&& fn) {
  if (v.is_array()) {
    for (const auto& item : v) fn(item, std::optional<std::string>{});
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) fn(it.value(), std::optional<std::string>(it.key()));
  } else {
    r.fail(field, "expected an array");
  }
}

inline SubfigureRecord parse_subfigure(const ordered_json& j, const std::string& ctx,
                                       const std::optional<std::string>& key) {
  FieldReader r(j, ctx);
  SubfigureRecord s;
  s.subfigure_id = key ? r.string("subfigure_id", false) : r.string("subfigure_id", true);
  if (s.subfigure_id.empty() && key) s.subfigure_id = *key;
  s.caption = r.string("caption", false);
  s.extra = r.rest();
  return s;
}

inline FigureRecord parse_figure(const ordered_json& j, const std::string& ctx,
                                 const std::optional<std::string>& key) {
  FieldReader r(j, ctx);
  FigureRecord f;
  f.figure_id = key ? r.string("figure_id", false) : r.string("figure_id", true);
  if (f.figure_id.empty() && key) f.figure_id = *key;
  f.caption = r.string("caption", false);
  if (const ordered_json* subs = r.get("subfigures"); subs && !subs->is_null()) {
    std::size_t n = 0;
    for_each_member(*subs, r, "subfigures",
                    [&](const ordered_json& item, const std::optional<std::string>& k) {
                      f.subfigures.push_back(parse_subfigure(
                          item, ctx + ", subfigure " + std::to_string(n++), k));
                    });
  }
  f.is_ga_component = r.boolean("is_ga_component", false);
  f.extra = r.rest();
  return f;
}

inline GaRecord parse_ga(const ordered_json& j, const std::string& ctx) {
  FieldReader r(j, ctx);
  GaRecord g;
  g.ga_figure_id = r.string("ga_figure_id", true);
  const std::string type = r.string("ga_type", true);
  auto t = parse_ga_type(type);
  if (!t) r.fail("ga_type", "unknown GA type '" + type + "' (expected Original, Reuse or Modified)");
  g.ga_type = *t;
  if (const ordered_json* comps = r.get("component_figure_ids"); comps && !comps->is_null()) {
    if (!comps->is_array()) r.fail("component_figure_ids", "expected an array of strings");
    for (const auto& c : *comps) {
      if (!c.is_string()) r.fail("component_figure_ids", "expected an array of strings");
      g.component_figure_ids.push_back(c.get<std::string>());
    }
  }
  g.extra = r.rest();
  return g;
}

}  // namespace detail

// `context` prefixes every error message, e.g. "line 4".
inline PaperRecord paper_from_json(const ordered_json& j, const std::string& context,
                                   const std::optional<std::string>& key = std::nullopt) {
  detail::FieldReader r(j, context);
  PaperRecord p;
  p.paper_id = key ? r.string("paper_id", false) : r.string("paper_id", true);
  if (p.paper_id.empty() && key) p.paper_id = *key;
  const std::string ctx = context + " (paper '" + p.paper_id + "')";
  p.title = r.string("title", false);
  p.abstract = r.string("abstract", false);
  p.primary_category = r.string("primary_category", true);
  const std::string split = r.string("split", true);
  auto s = parse_split(split);
  if (!s) r.fail("split", "unknown split value '" + split + "' (expected train, val or test)");
  p.split = *s;
  if (const ordered_json* figs = r.get("figures"); figs && !figs->is_null()) {
    std::size_t n = 0;
    detail::for_each_member(*figs, r, "figures",
                            [&](const ordered_json& item, const std::optional<std::string>& k) {
                              p.figures.push_back(
                                  detail::parse_figure(item, ctx + ", figure " + std::to_string(n++), k));
                            });
  }
  if (const ordered_json* ga = r.get("ga"); ga && !ga->is_null()) {
    p.ga = detail::parse_ga(*ga, ctx + ", ga");
  }
  p.teaser_figure_id = r.optional_string("teaser_figure_id");
  p.extra = r.rest();
  return p;
}

inline ordered_json to_json(const PaperRecord& p) {
  ordered_json j = ordered_json::object();
  j["paper_id"] = p.paper_id;
  j["title"] = p.title;
  j["abstract"] = p.abstract;
  j["primary_category"] = p.primary_category;
  j["split"] = std::string(to_string(p.split));
  ordered_json figs = ordered_json::array();
  for (const auto& f : p.figures) {
    ordered_json fj = ordered_json::object();
    fj["figure_id"] = f.figure_id;
    fj["caption"] = f.caption;
    ordered_json subs = ordered_json::array();
    for (const auto& s : f.subfigures) {
      ordered_json sj = ordered_json::object();
      sj["subfigure_id"] = s.subfigure_id;
      sj["caption"] = s.caption;
      for (auto it = s.extra.begin(); it != s.extra.end(); ++it) sj[it.key()] = it.value();
      subs.push_back(std::move(sj));
    }
    fj["subfigures"] = std::move(subs);
    fj["is_ga_component"] = f.is_ga_component;
    for (auto it = f.extra.begin(); it != f.extra.end(); ++it) fj[it.key()] = it.value();
    figs.push_back(std::move(fj));
  }
  j["figures"] = std::move(figs);
  if (p.ga) {
    ordered_json g = ordered_json::object();
    g["ga_figure_id"] = p.ga->ga_figure_id;
    g["ga_type"] = std::string(to_string(p.ga->ga_type));
    g["component_figure_ids"] = p.ga->component_figure_ids;
    for (auto it = p.ga->extra.begin(); it != p.ga->extra.end(); ++it) g[it.key()] = it.value();
    j["ga"] = std::move(g);
  } else {
    j["ga"] = nullptr;
  }
  j["teaser_figure_id"] = p.teaser_figure_id ? ordered_json(*p.teaser_figure_id) : ordered_json(nullptr);
  for (auto it = p.extra.begin(); it != p.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

// Canonical on-disk form: one compact JSON record per line, sorted by id.
inline void write_corpus(std::ostream& os, const Corpus& corpus) {
  for (const auto& p : corpus.papers()) {
    os << to_json(p).dump(-1, ' ', false, nlohmann::detail::error_handler_t::strict) << '\n';
  }
}

// Per-record failures collected while parsing, so ingestion can list every
// broken record instead of stopping at the first one.
struct RecordError {
  std::string location;
  std::string message;
};

struct ParseResult {
  std::vector<PaperRecord> records;
  std::vector<RecordError> errors;
};

// Reads newline-delimited records, a top-level JSON array, or an object
// keyed by paper_id. Never throws for per-record problems.
inline ParseResult parse_corpus_text(std::string_view text) {
  ParseResult out;
  std::size_t first = 0;
  while (first < text.size() && detail::is_space(text[first])) ++first;
  if (first == text.size()) return out;

  auto try_record = [&](const ordered_json& j, const std::string& loc, const std::optional<std::string>& key) {
    PaperRecord rec;
    try {
      rec = paper_from_json(j, loc, key);
    } catch (const ValidationError& e) {
      out.errors.push_back({loc, e.what()});
      return;
    }
    try {
      validate_record(rec);
    } catch (const ValidationError& e) {
      out.errors.push_back({loc, loc + ": " + e.what()});
      return;
    }
    out.records.push_back(std::move(rec));
  };

  bool line_mode = false;
  if (text[first] == '{') {
    std::size_t eol = text.find('\n', first);
    std::string_view line = text.substr(first, eol == std::string_view::npos ? text.size() - first : eol - first);
    ordered_json j = ordered_json::parse(line, nullptr, false);
    line_mode = !j.is_discarded() && j.is_object() && j.contains("paper_id");
  }

  if (line_mode) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      ++line_no;
      pos = eol + 1;
      if (whitespace_tokens(line).empty()) {
        if (eol == text.size()) break;
        continue;
      }
      const std::string loc = "line " + std::to_string(line_no);
      try {
        ordered_json j = ordered_json::parse(line);
        try_record(j, loc, std::nullopt);
      } catch (const nlohmann::json::parse_error& e) {
        out.errors.push_back({loc, loc + ": JSON parse error: " + e.what()});
      }
      if (eol == text.size()) break;
    }
    return out;
  }

  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    out.errors.push_back({"document", std::string("JSON parse error: ") + e.what()});
    return out;
  }
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) try_record(doc[i], "record " + std::to_string(i), std::nullopt);
  } else if (doc.is_object() && doc.contains("paper_id")) {
    try_record(doc, "record 0", std::nullopt);
  } else if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it) try_record(it.value(), "record '" + it.key() + "'", it.key());
  } else {
    out.errors.push_back({"document", "expected records as JSON lines, an array, or an object keyed by paper_id"});
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Corpus load_corpus_text(std::string_view text) {
  ParseResult parsed = parse_corpus_text(text);
  if (!parsed.errors.empty()) throw ValidationError(parsed.errors.front().message);
  return Corpus::from_records(std::move(parsed.records));
}

inline Corpus load_corpus(const std::string& path) { return load_corpus_text(read_file(path)); }

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct LengthSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
};

inline LengthSummary summarize(const std::vector<double>& values) {
  LengthSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

struct CorpusStats {
  std::size_t paper_count = 0;
  std::map<std::string, std::size_t> category_counts;
  LengthSummary title_tokens;
  LengthSummary abstract_tokens;
  LengthSummary caption_tokens;
  LengthSummary figures_per_paper;
  LengthSummary figures_per_paper_with_subfigures;
};

inline std::size_t token_count(std::string_view text) {
  try {
    return whitespace_tokens(strip_special_tokens(text, SpecialTokenMode::kDrop)).size();
  } catch (const ValidationError&) {
    return whitespace_tokens(text).size();
  }
}

// Figures "with subfigures" counts each subfigure in place of its parent.
inline CorpusStats compute_stats(const Corpus& corpus, std::optional<Split> split = std::nullopt) {
  CorpusStats st;
  std::vector<double> titles, abstracts, captions, figs, figs_sub;
  for (const auto& p : corpus.papers()) {
    if (split && p.split != *split) continue;
    ++st.paper_count;
    ++st.category_counts[p.primary_category];
    titles.push_back(static_cast<double>(token_count(p.title)));
    abstracts.push_back(static_cast<double>(token_count(p.abstract)));
    std::size_t with_sub = 0;
    for (const auto& f : p.figures) {
      captions.push_back(static_cast<double>(token_count(f.caption)));
      with_sub += f.subfigures.empty() ? 1 : f.subfigures.size();
    }
    figs.push_back(static_cast<double>(p.figures.size()));
    figs_sub.push_back(static_cast<double>(with_sub));
  }
  st.title_tokens = summarize(titles);
  st.abstract_tokens = summarize(abstracts);
  st.caption_tokens = summarize(captions);
  st.figures_per_paper = summarize(figs);
  st.figures_per_paper_with_subfigures = summarize(figs_sub);
  return st;
}

inline ordered_json to_json(const LengthSummary& s) {
  return ordered_json{{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"max", s.max}};
}

inline ordered_json to_json(const CorpusStats& st) {
  ordered_json cats = ordered_json::object();
  for (const auto& [k, v] : st.category_counts) cats[k] = v;
  return ordered_json{{"paper_count", st.paper_count},
                      {"category_counts", cats},
                      {"title_tokens", to_json(st.title_tokens)},
                      {"abstract_tokens", to_json(st.abstract_tokens)},
                      {"caption_tokens", to_json(st.caption_tokens)},
                      {"figures_per_paper", to_json(st.figures_per_paper)},
                      {"figures_per_paper_with_subfigures", to_json(st.figures_per_paper_with_subfigures)}};
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

enum class GtPolicy { kGaOnly, kComponents, kTeaserFallback };

inline std::optional<GtPolicy> parse_gt_policy(std::string_view s) {
  if (s == "ga-only") return GtPolicy::kGaOnly;
  if (s == "components") return GtPolicy::kComponents;
  if (s == "teaser-fallback") return GtPolicy::kTeaserFallback;
  return std::nullopt;
}

class NoGroundTruthError : public ValidationError {
 public:
  explicit NoGroundTruthError(const std::string& paper_id)
      : ValidationError("no ground truth for paper '" + paper_id + "'") {}
};

// Never returns an empty set.
inline std::set<std::string> ground_truth_set(const PaperRecord& paper, GtPolicy policy = GtPolicy::kGaOnly) {
  if (paper.ga) {
    if (policy == GtPolicy::kComponents && !paper.ga->component_figure_ids.empty()) {
      return {paper.ga->component_figure_ids.begin(), paper.ga->component_figure_ids.end()};
    }
    return {paper.ga->ga_figure_id};
  }
  if (policy == GtPolicy::kTeaserFallback && paper.teaser_figure_id) return {*paper.teaser_figure_id};
  throw NoGroundTruthError(paper.paper_id);
}

}  // namespace garec
