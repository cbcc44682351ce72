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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "garec/detail/format.hpp"
#include "garec/error.hpp"

namespace garec {

using Vector = std::vector<double>;

enum class EntityKind { kAbstract, kFigure, kSubfigure, kCaption, kGa, kAdapter };

inline std::string_view to_string(EntityKind k) {
  switch (k) {
    case EntityKind::kAbstract: return "abstract";
    case EntityKind::kFigure: return "figure";
    case EntityKind::kSubfigure: return "subfigure";
    case EntityKind::kCaption: return "caption";
    case EntityKind::kGa: return "ga";
    case EntityKind::kAdapter: return "adapter";
  }
  return "?";
}

inline std::optional<EntityKind> parse_entity_kind(std::string_view s) {
  for (auto k : {EntityKind::kAbstract, EntityKind::kFigure, EntityKind::kSubfigure, EntityKind::kCaption,
                 EntityKind::kGa, EntityKind::kAdapter}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

// "kind:id", where id is paper_id, paper_id/figure_id or
// paper_id/figure_id/subfigure_id.
struct EntityKey {
  EntityKind kind = EntityKind::kAbstract;
  std::string id;

  std::string str() const { return std::string(to_string(kind)) + ":" + id; }

  static EntityKey parse(std::string_view key) {
    const auto colon = key.find(':');
    if (colon == std::string_view::npos) {
      throw ValidationError("embedding key '" + std::string(key) + "' is not of the form kind:id");
    }
    auto kind = parse_entity_kind(key.substr(0, colon));
    if (!kind) throw ValidationError("embedding key '" + std::string(key) + "' has unknown kind");
    EntityKey k{*kind, std::string(key.substr(colon + 1))};
    std::string_view rest = k.id;
    for (;;) {
      const auto slash = rest.find('/');
      if (rest.substr(0, slash).empty()) {
        throw ValidationError("embedding key '" + std::string(key) + "' has an empty id component");
      }
      if (slash == std::string_view::npos) break;
      rest.remove_prefix(slash + 1);
    }
    return k;
  }

  static EntityKey abstract(std::string_view paper) { return {EntityKind::kAbstract, std::string(paper)}; }
  static EntityKey ga(std::string_view paper) { return {EntityKind::kGa, std::string(paper)}; }
  static EntityKey figure(std::string_view paper, std::string_view fig) {
    return {EntityKind::kFigure, std::string(paper) + "/" + std::string(fig)};
  }
  static EntityKey subfigure(std::string_view paper, std::string_view fig, std::string_view sub) {
    return {EntityKind::kSubfigure, std::string(paper) + "/" + std::string(fig) + "/" + std::string(sub)};
  }
  static EntityKey caption(std::string_view paper, std::string_view fig) {
    return {EntityKind::kCaption, std::string(paper) + "/" + std::string(fig)};
  }
  static EntityKey caption(std::string_view paper, std::string_view fig, std::string_view sub) {
    return {EntityKind::kCaption, std::string(paper) + "/" + std::string(fig) + "/" + std::string(sub)};
  }

  bool operator==(const EntityKey&) const = default;
};

// Read-only after construction. Components are kept as float, the on-disk
// precision; all arithmetic on them is done in double.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::uint32_t dim = 0) : dim_(dim) {}

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  template <typename T>
  void add(std::string_view key, std::span<const T> values) {
    EntityKey::parse(key);
    if (dim_ == 0) throw ValidationError("embedding store has dimension 0");
    if (values.size() != dim_) {
      throw DimensionMismatchError("embedding '" + std::string(key) + "' has " + std::to_string(values.size()) +
                                   " components, store dim is " + std::to_string(dim_));
    }
    for (auto v : values) {
      if (!std::isfinite(static_cast<double>(v)) || !std::isfinite(static_cast<float>(v))) {
        throw ValidationError("embedding '" + std::string(key) + "' has a non-finite component");
      }
    }
    if (index_.count(std::string(key))) throw ValidationError("duplicate embedding key '" + std::string(key) + "'");
    index_.emplace(std::string(key), keys_.size());
    keys_.emplace_back(key);
    for (auto v : values) data_.push_back(static_cast<float>(v));
  }

  void add(std::string_view key, const Vector& values) { add(key, std::span<const double>(values)); }
  void add(std::string_view key, const std::vector<float>& values) { add(key, std::span<const float>(values)); }

  std::optional<std::span<const float>> find(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) return std::nullopt;
    return std::span<const float>(data_.data() + it->second * dim_, dim_);
  }
  std::optional<std::span<const float>> find(const EntityKey& key) const { return find(key.str()); }

  bool contains(const EntityKey& key) const { return index_.count(key.str()) > 0; }

  Vector get(const EntityKey& key) const {
    auto v = find(key);
    if (!v) throw MissingEmbeddingError(key.str());
    return Vector(v->begin(), v->end());
  }

  std::optional<Vector> try_get(const EntityKey& key) const {
    auto v = find(key);
    if (!v) return std::nullopt;
    return Vector(v->begin(), v->end());
  }

  bool operator==(const EmbeddingStore& o) const {
    return dim_ == o.dim_ && keys_ == o.keys_ && data_.size() == o.data_.size() &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(float)) == 0;
  }

 private:
  std::uint32_t dim_;
  std::vector<float> data_;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

inline constexpr char kEmbeddingMagic[4] = {'S', 'G', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos, std::string_view what) {
  if (pos > bytes.size() || bytes.size() - pos < sizeof(T)) {
    throw ValidationError("embedding file truncated while reading " + std::string(what));
  }
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(u);
}

inline bool looks_textual(std::string_view bytes) {
  const std::size_t probe = std::min<std::size_t>(bytes.size(), 4096);
  if (probe == 0) return false;
  for (std::size_t i = 0; i < probe; ++i) {
    if (bytes[i] == '\0') return false;
  }
  const auto eol = bytes.find('\n');
  return bytes.substr(0, eol).find('\t') != std::string_view::npos;
}

inline EmbeddingStore parse_text_embeddings(std::string_view bytes) {
  EmbeddingStore store;
  std::vector<double> values;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ValidationError("embedding text line " + std::to_string(line_no) + ": expected 'kind:id<TAB>values'");
    }
    const std::string key(line.substr(0, tab));
    values.clear();
    std::string_view rest = line.substr(tab + 1);
    std::size_t i = 0;
    while (i < rest.size()) {
      while (i < rest.size() && rest[i] == ' ') ++i;
      const std::size_t b = i;
      while (i < rest.size() && rest[i] != ' ') ++i;
      if (i > b) {
        float f = 0.0f;
        if (!parse_number(rest.substr(b, i - b), f)) {
          throw ValidationError("embedding '" + key + "': cannot parse component '" +
                                std::string(rest.substr(b, i - b)) + "'");
        }
        values.push_back(f);
      }
    }
    if (store.dim() == 0) {
      if (values.empty()) throw ValidationError("embedding '" + key + "' has no components");
      store = EmbeddingStore(static_cast<std::uint32_t>(values.size()));
    }
    store.add(key, std::span<const double>(values));
  }
  return store;
}

}  // namespace detail

inline EmbeddingStore parse_embeddings(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    if (detail::looks_textual(bytes)) return detail::parse_text_embeddings(bytes);
    throw ValidationError("embedding file magic mismatch (expected \"SGEM\")");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos, "version");
  if (version != kEmbeddingVersion) {
    throw ValidationError("unsupported embedding format version " + std::to_string(version));
  }
  const auto dim = detail::get_le<std::uint32_t>(bytes, pos, "dim");
  const auto count = detail::get_le<std::uint64_t>(bytes, pos, "record count");
  if (dim == 0) throw ValidationError("embedding file declares dim 0");
  EmbeddingStore store(dim);
  std::vector<float> values(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto key_len = detail::get_le<std::uint16_t>(bytes, pos, "key length");
    if (bytes.size() - pos < key_len) throw ValidationError("embedding file truncated in key of record " + std::to_string(r));
    const std::string key(bytes.substr(pos, key_len));
    pos += key_len;
    const std::size_t payload = static_cast<std::size_t>(dim) * 4;
    if (bytes.size() - pos < payload) {
      throw ValidationError("embedding '" + key + "': payload shorter than declared dim " + std::to_string(dim));
    }
    for (std::uint32_t d = 0; d < dim; ++d) {
      values[d] = std::bit_cast<float>(detail::get_le<std::uint32_t>(bytes, pos, "component"));
    }
    store.add(key, std::span<const float>(values));
  }
  if (pos != bytes.size()) {
    throw ValidationError("embedding file has " + std::to_string(bytes.size() - pos) +
                          " trailing bytes; declared dim does not match record payload size");
  }
  return store;
}

inline EmbeddingStore load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embedding file '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_embeddings(bytes);
}

inline std::string serialize_embeddings(const EmbeddingStore& store) {
  std::string out(kEmbeddingMagic, 4);
  detail::put_le<std::uint32_t>(out, kEmbeddingVersion);
  detail::put_le<std::uint32_t>(out, store.dim());
  detail::put_le<std::uint64_t>(out, store.size());
  for (const auto& key : store.keys()) {
    if (key.size() > 0xFFFF) throw ValidationError("embedding key too long: " + key.substr(0, 64));
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out += key;
    const auto values = *store.find(key);
    for (float f : values) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline void save_embeddings(const std::string& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file '" + path + "'");
  const std::string bytes = serialize_embeddings(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Vector math
// ---------------------------------------------------------------------------

template <typename T>
double l2_norm(std::span<const T> v) {
  double s = 0.0;
  for (auto x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

// Cosine similarity accumulated in double and clamped to [-1, 1]. Throws
// ZeroNormError (naming the offending argument) instead of returning 0.
template <typename T, typename U>
double cosine(std::span<const T> u, std::span<const U> v, std::string_view u_name = "u",
              std::string_view v_name = "v") {
  if (u.size() != v.size()) {
    throw DimensionMismatchError("cosine of vectors with dims " + std::to_string(u.size()) + " and " +
                                 std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = static_cast<double>(u[i]);
    const double b = static_cast<double>(v[i]);
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0) throw ZeroNormError(std::string(u_name));
  if (nv == 0.0) throw ZeroNormError(std::string(v_name));
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline double cosine(const Vector& u, const Vector& v, std::string_view u_name = "u", std::string_view v_name = "v") {
  return cosine(std::span<const double>(u), std::span<const double>(v), u_name, v_name);
}

// Componentwise product; no normalization.
template <typename T, typename U>
Vector fuse_hadamard(std::span<const T> figure, std::span<const U> caption) {
  if (figure.size() != caption.size()) {
    throw DimensionMismatchError("Hadamard fusion of vectors with dims " + std::to_string(figure.size()) + " and " +
                                 std::to_string(caption.size()));
  }
  Vector out(figure.size());
  for (std::size_t i = 0; i < figure.size(); ++i) {
    out[i] = static_cast<double>(figure[i]) * static_cast<double>(caption[i]);
  }
  return out;
}

inline Vector fuse_hadamard(const Vector& figure, const Vector& caption) {
  return fuse_hadamard(std::span<const double>(figure), std::span<const double>(caption));
}

}  // namespace garec
