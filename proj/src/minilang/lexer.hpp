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

#include "psm/minilang/ast.hpp"

namespace psm::ml0::detail {

enum class Tok {
  Ident, Int, Float, String, Keyword, Punct, End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier/keyword/punct spelling, or decoded string literal
  SourcePos pos;
};

struct LexError {
  SourcePos pos;
  std::string message;
};

// Returns false and fills `error` on the first lexical error.
bool lex(std::string_view source, std::vector<Token>& out, LexError& error);

}  // namespace psm::ml0::detail
