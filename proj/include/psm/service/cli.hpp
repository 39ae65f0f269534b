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

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "psm/core/error.hpp"
#include "psm/density/density.hpp"
#include "psm/network/network.hpp"

namespace psm::service {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

int exit_code(ErrorCode code);

// Runs the psm command line; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// name=value for a point, name=[lo,hi] or name=(lo,hi) for an interval.
density::Constraint parse_assignment(std::string_view text);
Scalar parse_literal(std::string_view text);

// Bar chart of a histogram.
std::string histogram_svg(const network::Histogram& h, const std::string& title);

}  // namespace psm::service
