// Copyright 2026 The vdub Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vdub/autograd.hpp"

namespace vdub {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Coordinates where one-sided differences disagree, i.e. the function has a
  // kink within eps (ReLU, |x|). They are excluded from max_rel_error.
  std::size_t skipped = 0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-6);

// f builds a scalar from leaf variables created for `inputs`.
using LeafGraph = std::function<Var(Tape&, std::span<const Var>)>;
GradCheckResult gradient_check(const LeafGraph& f, std::vector<Mat> inputs, double eps = 1e-5);

// f builds a scalar from the store's parameters (eval mode). At most
// max_entries coordinates per parameter are probed, spread evenly.
using ParamGraph = std::function<Var(const Context&)>;
GradCheckResult gradient_check_params(const ParamGraph& f, ParamStore& store, std::span<const std::size_t> params,
                                      double eps = 1e-5, std::size_t max_entries = 64);

// Named subgraphs on small random shapes: "aligner-dc", "ise",
// "variance-adaptor", "mel-l1", "fft-block".
GradCheckResult gradient_check(const std::string& subgraph, std::uint64_t seed = 0, double eps = 1e-5);
std::vector<std::string> gradient_check_subgraphs();

}  // namespace vdub
