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

#include "psm/core/rng.hpp"

namespace psm::density::detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double norm_cdf(double z);
double norm_sf(double z);  // 1 - cdf, accurate in the upper tail
double norm_quantile(double p);
double norm_logpdf(double z);

// P(a < Z < b) for standard normal Z.
double norm_mass(double a, double b);

// P(X > h, Y > k) for standard bivariate normal with correlation r.
double bvn_upper(double h, double k, double r);
// P(a1 < X < b1, a2 < Y < b2); bounds may be infinite.
double bvn_mass(double a1, double b1, double a2, double b2, double r);

// Draw from N(0,1) truncated to (a, b).
double truncated_normal(double a, double b, Rng& rng);
// E[Z | a < Z < b].
double truncated_normal_mean(double a, double b);

double log_sum_exp(const double* v, int n);

}  // namespace psm::density::detail
