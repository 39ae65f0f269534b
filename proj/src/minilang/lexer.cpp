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


#include "lexer.hpp"

#include <array>
#include <cctype>

namespace psm::ml0::detail {
namespace {

constexpr std::array kKeywords = {
    "class", "var", "def", "driver", "let", "if", "else", "while", "return",
    "new", "this", "true", "false", "null", "int", "float", "bool", "string",
};

bool is_keyword(std::string_view s) {
  for (auto k : kKeywords) {
    if (s == k) return true;
  }
  return false;
}

}  // namespace

bool lex(std::string_view src, std::vector<Token>& out, LexError& error) {
  std::size_t i = 0;
  int line = 1;
  int col = 1;
  auto advance = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance();
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance();
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      SourcePos start{line, col};
      advance(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance();
      if (i + 1 >= src.size()) {
        error = {start, "unterminated block comment"};
        return false;
      }
      advance(2);
      continue;
    }

    Token t;
    t.pos = {line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.text = std::string(src.substr(i, j - i));
      t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      bool is_float = false;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        is_float = true;
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          is_float = true;
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      t.text = std::string(src.substr(i, j - i));
      t.kind = is_float ? Tok::Float : Tok::Int;
      advance(j - i);
    } else if (c == '"') {
      advance();
      std::string value;
      while (true) {
        if (i >= src.size() || src[i] == '\n') {
          error = {t.pos, "unterminated string literal"};
          return false;
        }
        char d = src[i];
        if (d == '"') {
          advance();
          break;
        }
        if (d == '\\') {
          if (i + 1 >= src.size()) {
            error = {t.pos, "unterminated string literal"};
            return false;
          }
          char e = src[i + 1];
          switch (e) {
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            case '"': value += '"'; break;
            case '\\': value += '\\'; break;
            default:
              error = {SourcePos{line, col}, std::string("unknown escape \\") + e};
              return false;
          }
          advance(2);
          continue;
        }
        value += d;
        advance();
      }
      t.kind = Tok::String;
      t.text = std::move(value);
    } else {
      static constexpr std::array kTwo = {"==", "!=", "<=", ">=", "&&", "||"};
      std::string two(src.substr(i, 2));
      bool matched = false;
      for (auto p : kTwo) {
        if (two == p) {
          t.text = two;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("{}()[];:,.=<>+-*/%!").find(c) == std::string_view::npos) {
          error = {t.pos, std::string("unexpected character '") + c + "'"};
          return false;
        }
        t.text = std::string(1, c);
      }
      t.kind = Tok::Punct;
      advance(t.text.size());
    }
    out.push_back(std::move(t));
  }
  out.push_back(Token{Tok::End, "", SourcePos{line, col}});
  return true;
}

}  // namespace psm::ml0::detail
