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

#include "ldpdl/matrix.h"

#include <cassert>

namespace ldpdl {

void Matrix::AppendRow(absl::Span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  assert(values.size() == cols_);
  values_.insert(values_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::SelectRows(absl::Span<const size_t> indices) const {
  Matrix out(0, cols_);
  out.values_.reserve(indices.size() * cols_);
  for (size_t index : indices) {
    auto r = row(index);
    out.values_.insert(out.values_.end(), r.begin(), r.end());
  }
  out.rows_ = indices.size();
  return out;
}

}  // namespace ldpdl
