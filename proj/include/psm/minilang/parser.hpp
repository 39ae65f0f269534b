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
#include <string_view>
#include <vector>

#include "psm/core/error.hpp"
#include "psm/minilang/ast.hpp"

namespace psm::ml0 {

struct Diagnostic {
  ErrorCode code = ErrorCode::SyntaxError;
  SourcePos pos;
  std::string message;

  std::string to_string() const;
};

struct ParseOutcome {
  Program program;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

// Parses and checks ML0 source. Syntax errors stop at the first error;
// name-resolution and type errors are collected for the whole program.
ParseOutcome parse_program(std::string_view source);

// As parse_program, but throws ParseError when any diagnostic was produced.
Program parse(std::string_view source);

}  // namespace psm::ml0
