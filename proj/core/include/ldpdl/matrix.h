// Copyright 2026 The ldpdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LDPDL_MATRIX_H_
#define LDPDL_MATRIX_H_

#include <cstddef>
#include <vector>

#include "absl/types/span.h"

namespace ldpdl {

// Dense row-major matrix of doubles. Rows are feature vectors throughout the
// library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& at(size_t r, size_t c) { return values_[r * cols_ + c]; }
  double at(size_t r, size_t c) const { return values_[r * cols_ + c]; }

  absl::Span<const double> row(size_t r) const {
    return absl::MakeConstSpan(values_.data() + r * cols_, cols_);
  }
  absl::Span<double> mutable_row(size_t r) {
    return absl::MakeSpan(values_.data() + r * cols_, cols_);
  }

  void AppendRow(absl::Span<const double> values);

  const std::vector<double>& values() const { return values_; }

  // Gathers the given rows, in order, into a new matrix.
  Matrix SelectRows(absl::Span<const size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace ldpdl

#endif  // LDPDL_MATRIX_H_
