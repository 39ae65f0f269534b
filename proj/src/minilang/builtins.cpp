// Copyright 2026 The PSM Authors.
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


#include "psm/minilang/builtins.hpp"

#include <cmath>
#include <string>

#include "psm/core/error.hpp"

namespace psm::ml0 {
namespace {

double numeric_param(std::string_view name, std::span<const Scalar> params, std::size_t i) {
  if (!is_numeric(params[i]) || std::holds_alternative<bool>(params[i])) {
    throw Error(ErrorCode::InvalidParams, std::string(name) + ": parameter " + std::to_string(i + 1) + " is not a number");
  }
  double v = as_double(params[i]);
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::InvalidParams, std::string(name) + ": parameter " + std::to_string(i + 1) + " is not finite");
  }
  return v;
}

void expect_arity(std::string_view name, std::span<const Scalar> params, std::size_t n) {
  if (params.size() != n) {
    throw Error(ErrorCode::InvalidParams, std::string(name) + " takes " + std::to_string(n) + " parameters");
  }
}

}  // namespace

bool is_sampler(std::string_view name) {
  return name == "normal" || name == "lognormal" || name == "uniform" || name == "categorical";
}

Scalar sample_builtin(std::string_view name, std::span<const Scalar> params, Rng& rng) {
  if (name == "normal" || name == "lognormal") {
    expect_arity(name, params, 2);
    double loc = numeric_param(name, params, 0);
    double scale = numeric_param(name, params, 1);
    if (scale <= 0) throw Error(ErrorCode::InvalidParams, std::string(name) + ": stddev must be > 0");
    double x = loc + scale * rng.normal();
    return name == "normal" ? x : std::exp(x);
  }
  if (name == "uniform") {
    expect_arity(name, params, 2);
    double lo = numeric_param(name, params, 0);
    double hi = numeric_param(name, params, 1);
    if (lo > hi) throw Error(ErrorCode::InvalidParams, "uniform: lo must not exceed hi");
    if (lo == hi) return lo;
    return rng.uniform(lo, hi);
  }
  if (name == "categorical") {
    if (params.empty() || params.size() % 2 != 0) {
      throw Error(ErrorCode::InvalidParams, "categorical takes value/weight pairs");
    }
    double total = 0;
    for (std::size_t i = 1; i < params.size(); i += 2) {
      double w = numeric_param(name, params, i);
      if (w < 0) throw Error(ErrorCode::InvalidParams, "categorical: weights must be >= 0");
      total += w;
    }
    if (total <= 0) throw Error(ErrorCode::InvalidParams, "categorical: total weight must be > 0");
    double u = rng.uniform() * total;
    double acc = 0;
    std::size_t last_positive = 0;
    for (std::size_t i = 1; i < params.size(); i += 2) {
      double w = as_double(params[i]);
      if (w <= 0) continue;
      last_positive = i - 1;
      acc += w;
      if (u < acc) return params[i - 1];
    }
    return params[last_positive];
  }
  throw Error(ErrorCode::InvalidParams, "unknown sampler '" + std::string(name) + "'");
}

}  // namespace psm::ml0
