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


#pragma once

#include <string>
#include <vector>

#include "psm/apps/apps.hpp"

namespace psm::apps::detail {

// Literal written as 80 for a float variable, or 3.0 for an int one.
Scalar coerce(ScalarKind kind, const Scalar& x);

// Numeric values compare with a relative tolerance, others exactly.
bool same_value(const Scalar& a, const Scalar& b);

// Score of the given values under the node density, marginalized to them.
double score_values(const network::ModelNode& node, const std::vector<std::string>& vars,
                    const std::vector<Scalar>& values);

}  // namespace psm::apps::detail
