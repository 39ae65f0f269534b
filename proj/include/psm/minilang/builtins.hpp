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

#include <span>
#include <string_view>

#include "psm/core/rng.hpp"
#include "psm/core/scalar.hpp"

namespace psm::ml0 {

// Workload samplers available to ML0 programs.
//   normal(mean, stddev)          stddev > 0
//   lognormal(logmean, logstddev) logstddev > 0; exp of a normal draw
//   uniform(lo, hi)               lo <= hi; returns lo when lo == hi
//   categorical(v1, w1, v2, w2, ...) weights >= 0, at least one > 0
// Throws InvalidParams for bad parameters or an unknown name.
bool is_sampler(std::string_view name);
Scalar sample_builtin(std::string_view name, std::span<const Scalar> params, Rng& rng);

}  // namespace psm::ml0
