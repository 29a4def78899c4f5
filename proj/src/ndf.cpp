// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdub/ndf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "vdub/error.hpp"

namespace vdub {

static_assert(std::endian::native == std::endian::little, "NDF1 I/O assumes a little-endian host");

std::int64_t NdArray::numel() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_ndf(const std::filesystem::path& path, const NdArray& array, NdfType dtype) {
  if (array.numel() != static_cast<std::int64_t>(array.data.size())) {
    throw ShapeError("NDF1 write: shape does not match data size for " + path.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "NDF1 " << (dtype == NdfType::kF32 ? "f32" : "f64") << ' ' << array.shape.size();
  for (auto d : array.shape) out << ' ' << d;
  out << '\n';
  if (dtype == NdfType::kF32) {
    std::vector<float> buf(array.data.begin(), array.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    out.write(reinterpret_cast<const char*>(array.data.data()),
              static_cast<std::streamsize>(array.data.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

NdArray read_ndf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open NDF1 file: " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, dtype;
  std::size_t rank = 0;
  hs >> magic >> dtype >> rank;
  if (magic != "NDF1" || !hs) throw SchemaError("not an NDF1 file: " + path.string());
  if (dtype != "f32" && dtype != "f64") throw SchemaError("unsupported NDF1 dtype '" + dtype + "' in " + path.string());
  NdArray a;
  a.shape.resize(rank);
  for (auto& d : a.shape) {
    if (!(hs >> d) || d < 0) throw SchemaError("bad NDF1 shape in " + path.string());
  }
  const auto n = static_cast<std::size_t>(a.numel());
  a.data.resize(n);
  if (dtype == "f32") {
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    std::copy(buf.begin(), buf.end(), a.data.begin());
  } else {
    in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!in) throw SchemaError("truncated NDF1 payload in " + path.string());
  return a;
}

void write_matrix(const std::filesystem::path& path, const Mat& m, NdfType dtype) {
  NdArray a;
  a.shape = {m.rows(), m.cols()};
  a.data.assign(m.data(), m.data() + m.size());
  write_ndf(path, a, dtype);
}

void write_vector(const std::filesystem::path& path, const Vec& v, NdfType dtype) {
  NdArray a;
  a.shape = {v.size()};
  a.data.assign(v.data(), v.data() + v.size());
  write_ndf(path, a, dtype);
}

Mat read_matrix(const std::filesystem::path& path) {
  NdArray a = read_ndf(path);
  Eigen::Index rows = 1, cols = 1;
  if (a.shape.size() == 1) {
    cols = a.shape[0];
  } else if (a.shape.size() >= 2) {
    rows = a.shape[0];
    cols = a.shape[0] == 0 ? 0 : a.numel() / a.shape[0];
  }
  Mat m(rows, cols);
  if (m.size() > 0) std::memcpy(m.data(), a.data.data(), a.data.size() * sizeof(double));
  return m;
}

Vec read_vector(const std::filesystem::path& path) {
  NdArray a = read_ndf(path);
  if (a.shape.size() != 1) throw SchemaError("expected a rank-1 NDF1 array in " + path.string());
  return Eigen::Map<const Vec>(a.data.data(), static_cast<Eigen::Index>(a.data.size()));
}

}  // namespace vdub
