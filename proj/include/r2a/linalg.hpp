// Copyright 2026 The R2A Authors.
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

#include <Eigen/Core>

#include "r2a/errors.hpp"

namespace r2a {

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using RowMatrix = Eigen::Matrix<Scalar, Rows, Cols, Eigen::RowMajor>;

template <class Scalar, int Rows = Eigen::Dynamic>
using Vector = Eigen::Matrix<Scalar, Rows, 1>;

using RowMatrixXf = RowMatrix<float>;
using RowMatrixXd = RowMatrix<double>;
using VectorXf = Vector<float>;

/// Dot product with a fixed summation order: 16 interleaved lanes, combined
/// pairwise, then the scalar tail. The result depends only on the values and
/// their length, never on pointer alignment or on which rows are scanned
/// together, which is what keeps sharded scans bit-identical.
template <class Scalar>
inline Scalar lane_dot(const Scalar* a, const Scalar* b, std::size_t n) noexcept {
  constexpr std::size_t kLanes = 16;
  Scalar acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (std::size_t w = kLanes / 2; w > 0; w /= 2) {
    for (std::size_t l = 0; l < w; ++l) acc[l] += acc[l + w];
  }
  Scalar s = acc[0];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// Cosine similarity z.v / (|z||v|).
template <class DerivedA, class DerivedB>
typename DerivedA::Scalar similarity(const Eigen::MatrixBase<DerivedA>& z,
                                     const Eigen::MatrixBase<DerivedB>& v) {
  using Scalar = typename DerivedA::Scalar;
  if (z.size() != v.size()) {
    throw ArgumentError("similarity: dim mismatch (" + std::to_string(z.size()) +
                        " vs " + std::to_string(v.size()) + ")");
  }
  const Scalar nz = z.norm();
  const Scalar nv = v.norm();
  if (!(nz > Scalar(0)) || !(nv > Scalar(0))) {
    throw ArgumentError("similarity: zero-norm vector");
  }
  return z.dot(v) / (nz * nv);
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace r2a
