// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vdub {

// Coarse failure classes. The CLI maps each to an exit code.
enum class ErrorKind {
  kUsage,
  kConfig,
  kGeometry,
  kData,
  kSchema,
  kSignal,
  kShape,
  kOov,
  kNumeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define VDUB_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(Kind, what) {}   \
  };

VDUB_DEFINE_ERROR(UsageError, ErrorKind::kUsage)
VDUB_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
VDUB_DEFINE_ERROR(GeometryError, ErrorKind::kGeometry)
VDUB_DEFINE_ERROR(DataError, ErrorKind::kData)
VDUB_DEFINE_ERROR(SchemaError, ErrorKind::kSchema)
VDUB_DEFINE_ERROR(SignalError, ErrorKind::kSignal)
VDUB_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
VDUB_DEFINE_ERROR(OovError, ErrorKind::kOov)
VDUB_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)

#undef VDUB_DEFINE_ERROR

}  // namespace vdub
