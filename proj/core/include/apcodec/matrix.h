// Copyright 2026 The APCodec Authors.
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

#ifndef APCODEC_MATRIX_H_
#define APCODEC_MATRIX_H_

#include <cstdint>
#include <span>
#include <vector>

namespace apcodec {

// Dense row-major matrix of doubles. Frames index rows throughout the
// codebase; bins, channels or latent dimensions index columns.
struct Matrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(int64_t num_rows, int64_t num_cols, double fill = 0.0)
      : rows(num_rows), cols(num_cols), values(num_rows * num_cols, fill) {}

  double& operator()(int64_t r, int64_t c) { return values[r * cols + c]; }
  double operator()(int64_t r, int64_t c) const { return values[r * cols + c]; }

  std::span<double> row(int64_t r) {
    return std::span<double>(values).subspan(r * cols, cols);
  }
  std::span<const double> row(int64_t r) const {
    return std::span<const double>(values).subspan(r * cols, cols);
  }

  bool operator==(const Matrix&) const = default;
};

}  // namespace apcodec

#endif  // APCODEC_MATRIX_H_
