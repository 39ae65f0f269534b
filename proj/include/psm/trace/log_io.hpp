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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "psm/trace/event.hpp"

namespace psm::trace {

inline constexpr int kTraceFormatVersion = 1;

// Newline-delimited JSON: a `{"psm_trace": 1}` header line followed by one
// event per line.
std::string event_to_line(const TraceEvent& event);
void write_log(std::ostream& out, const TraceLog& log);
std::string write_log(const TraceLog& log);
void write_log_file(const std::filesystem::path& path, const TraceLog& log);

// Parses and validates a log. The header line is optional. Throws
// MalformedLine, SequenceGap or OrphanFrame naming the first offending line.
TraceLog read_log(std::string_view text);
TraceLog read_log_file(const std::filesystem::path& path);

// Checks ordering and frame-nesting invariants of an in-memory log. Line
// numbers in errors count events from 1.
void validate(const TraceLog& log);

}  // namespace psm::trace
