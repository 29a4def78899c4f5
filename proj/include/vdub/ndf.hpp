// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vdub/tensor.hpp"

namespace vdub {

// NDF1 container: an ASCII header line "NDF1 <dtype> <rank> <d0> ... <dk>\n"
// followed by row-major little-endian values. dtype is f32 or f64.
enum class NdfType { kF32, kF64 };

struct NdArray {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  std::int64_t numel() const;
};

void write_ndf(const std::filesystem::path& path, const NdArray& array,
               NdfType dtype = NdfType::kF32);
NdArray read_ndf(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const Mat& m, NdfType dtype = NdfType::kF32);
void write_vector(const std::filesystem::path& path, const Vec& v, NdfType dtype = NdfType::kF32);
// Rank-1 files load as a single row; rank > 2 files are flattened past dim 0.
Mat read_matrix(const std::filesystem::path& path);
Vec read_vector(const std::filesystem::path& path);

}  // namespace vdub
