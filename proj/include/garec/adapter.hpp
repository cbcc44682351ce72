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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "garec/embed_store.hpp"
#include "garec/error.hpp"

namespace garec {

// Dense row-major linear map applied to figure/GA embeddings before
// similarity. Serialized in the embedding format, one "adapter:row:<i>"
// record per row.
class LinearAdapter {
 public:
  LinearAdapter() = default;
  LinearAdapter(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), w_(rows * cols, 0.0) {}

  static LinearAdapter identity(std::size_t dim) {
    LinearAdapter a(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) a(i, i) = 1.0;
    return a;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return w_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return w_[r * cols_ + c]; }
  const std::vector<double>& data() const { return w_; }
  std::vector<double>& data() { return w_; }

  template <typename T>
  Vector apply(std::span<const T> x) const {
    if (x.size() != cols_) {
      throw DimensionMismatchError("adapter expects dim " + std::to_string(cols_) + ", got " +
                                   std::to_string(x.size()));
    }
    Vector y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) s += w_[r * cols_ + c] * static_cast<double>(x[c]);
      y[r] = s;
    }
    return y;
  }
  Vector apply(const Vector& x) const { return apply(std::span<const double>(x)); }

  bool operator==(const LinearAdapter&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> w_;
};

inline EmbeddingStore adapter_to_store(const LinearAdapter& a) {
  EmbeddingStore store(static_cast<std::uint32_t>(a.cols()));
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::span<const double> row(a.data().data() + r * a.cols(), a.cols());
    store.add("adapter:row:" + std::to_string(r), row);
  }
  return store;
}

inline LinearAdapter adapter_from_store(const EmbeddingStore& store) {
  std::size_t rows = 0;
  while (store.find("adapter:row:" + std::to_string(rows))) ++rows;
  if (rows == 0) throw ValidationError("embedding file holds no adapter:row:<i> records");
  LinearAdapter a(rows, store.dim());
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = *store.find("adapter:row:" + std::to_string(r));
    for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = row[c];
  }
  return a;
}

}  // namespace garec
