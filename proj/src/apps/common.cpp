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


#include <cmath>

#include "common.hpp"
#include "psm/core/error.hpp"

namespace psm::apps {

using structure::VariableRole;

namespace {

std::string last_segment(const std::string& name) {
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

int preference(VariableRole role) {
  switch (role) {
    case VariableRole::Read: return 0;
    case VariableRole::FlattenedParam: return 1;
    case VariableRole::Param: return 2;
    default: return -1;
  }
}

}  // namespace

std::string caller_source(const network::ModelNode& caller, const structure::VariableSpec& callee_var) {
  const std::string key = last_segment(callee_var.name);
  std::string best;
  int best_rank = 99;
  for (const auto& v : caller.variables) {
    int rank = preference(v.role);
    if (rank < 0 || last_segment(v.name) != key || caller.density.index_of(v.name) < 0) continue;
    if (rank < best_rank) {
      best = v.name;
      best_rank = rank;
    }
  }
  return best;
}

namespace detail {

Scalar coerce(ScalarKind kind, const Scalar& x) {
  if (kind == ScalarKind::Float && std::holds_alternative<std::int64_t>(x)) {
    return static_cast<double>(std::get<std::int64_t>(x));
  }
  if (kind == ScalarKind::Int && std::holds_alternative<double>(x)) {
    double d = std::get<double>(x);
    if (std::isfinite(d) && std::floor(d) == d) return static_cast<std::int64_t>(d);
  }
  return x;
}

bool same_value(const Scalar& a, const Scalar& b) {
  if (is_numeric(a) && is_numeric(b)) {
    double x = as_double(a), y = as_double(b);
    return std::abs(x - y) <= 1e-9 * (1 + std::abs(x) + std::abs(y));
  }
  return a == b;
}

double score_values(const network::ModelNode& node, const std::vector<std::string>& vars,
                    const std::vector<Scalar>& values) {
  return density::quantile_score(density::marginal(node.density, vars), values);
}

}  // namespace detail

}  // namespace psm::apps
