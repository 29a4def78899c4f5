// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vdub {

// Sequences are stored one frame per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// 1 marks a real position, 0 a padded one.
using Mask = std::vector<std::uint8_t>;

inline Mask full_mask(std::size_t n) { return Mask(n, 1); }

inline std::size_t count_valid(const Mask& m) {
  std::size_t c = 0;
  for (auto v : m) c += v ? 1 : 0;
  return c;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace vdub
