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

#include <cstdint>
#include <string>

#include "psm/minilang/ast.hpp"
#include "psm/trace/event.hpp"

namespace psm::ml0 {

struct ExecOptions {
  std::uint64_t seed = 0;
  std::uint64_t iterations = 1;
  std::string entry;  // empty: the program's default entry driver
  std::uint64_t max_steps_per_iteration = 50'000'000;
  std::size_t max_call_depth = 512;
};

// Runs the entry driver `iterations` times and returns the trace. Runtime
// errors abort the current iteration (one abort event per open frame) and
// execution continues with the next iteration.
trace::TraceLog execute(const Program& program, const ExecOptions& options);

}  // namespace psm::ml0
