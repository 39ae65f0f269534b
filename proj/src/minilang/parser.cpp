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


#include "psm/minilang/parser.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "checker.hpp"
#include "lexer.hpp"

namespace psm::ml0 {
namespace {

using detail::Tok;
using detail::Token;

struct SyntaxFailure {
  Diagnostic diag;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Program parse_program() {
    Program program;
    while (!at_end()) {
      if (is_kw("class")) {
        program.classes.push_back(parse_class());
      } else if (is_kw("driver")) {
        program.drivers.push_back(parse_driver());
      } else {
        fail_expected({"'class'", "'driver'"});
      }
    }
    return program;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is_kw(std::string_view kw) const { return peek().kind == Tok::Keyword && peek().text == kw; }
  bool is_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::End: return "end of input";
      case Tok::String: return "string literal";
      case Tok::Int:
      case Tok::Float: return "number '" + t.text + "'";
      case Tok::Ident: return "identifier '" + t.text + "'";
      default: return "'" + t.text + "'";
    }
  }

  [[noreturn]] void fail_expected(std::initializer_list<std::string_view> expected) {
    std::ostringstream msg;
    msg << "expected ";
    std::size_t i = 0;
    for (auto e : expected) {
      if (i > 0) msg << (i + 1 == expected.size() ? " or " : ", ");
      msg << e;
      ++i;
    }
    msg << ", found " << describe(peek());
    throw SyntaxFailure{Diagnostic{ErrorCode::SyntaxError, peek().pos, msg.str()}};
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) {
      std::string quoted = "'" + std::string(p) + "'";
      fail_expected({quoted});
    }
    take();
  }

  void expect_kw(std::string_view kw) {
    if (!is_kw(kw)) {
      std::string quoted = "'" + std::string(kw) + "'";
      fail_expected({quoted});
    }
    take();
  }

  Token expect_ident() {
    if (peek().kind != Tok::Ident) fail_expected({"identifier"});
    return take();
  }

  Type parse_type() {
    const Token& t = peek();
    if (t.kind == Tok::Keyword) {
      if (auto k = scalar_kind_from_name(t.text)) {
        take();
        return Type::scalar(*k);
      }
    }
    if (t.kind == Tok::Ident) return Type::class_type(take().text);
    fail_expected({"type name"});
  }

  ClassDecl parse_class() {
    ClassDecl cls;
    cls.pos = peek().pos;
    expect_kw("class");
    cls.name = expect_ident().text;
    expect_punct("{");
    while (!is_punct("}")) {
      if (is_kw("var")) {
        FieldDecl f;
        f.pos = take().pos;
        f.name = expect_ident().text;
        expect_punct(":");
        f.type = parse_type();
        if (is_punct("=")) {
          take();
          f.init = parse_expr();
        }
        expect_punct(";");
        cls.properties.push_back(std::move(f));
      } else if (is_kw("def")) {
        cls.methods.push_back(parse_method());
      } else {
        fail_expected({"'var'", "'def'", "'}'"});
      }
    }
    expect_punct("}");
    return cls;
  }

  MethodDecl parse_method() {
    MethodDecl m;
    m.pos = peek().pos;
    expect_kw("def");
    m.name = expect_ident().text;
    expect_punct("(");
    if (!is_punct(")")) {
      while (true) {
        Param p;
        p.pos = peek().pos;
        p.name = expect_ident().text;
        expect_punct(":");
        p.type = parse_type();
        m.params.push_back(std::move(p));
        if (!is_punct(",")) break;
        take();
      }
    }
    expect_punct(")");
    m.return_type = Type::void_type();
    if (is_punct(":")) {
      take();
      m.return_type = parse_type();
    }
    m.body = parse_block();
    return m;
  }

  DriverDecl parse_driver() {
    DriverDecl d;
    d.fn.pos = peek().pos;
    expect_kw("driver");
    d.fn.name = expect_ident().text;
    expect_punct("(");
    expect_punct(")");
    d.fn.return_type = Type::void_type();
    d.fn.body = parse_block();
    return d;
  }

  std::vector<StmtPtr> parse_block() {
    expect_punct("{");
    std::vector<StmtPtr> body;
    while (!is_punct("}")) {
      if (at_end()) fail_expected({"'}'"});
      body.push_back(parse_stmt());
    }
    take();
    return body;
  }

  StmtPtr parse_stmt() {
    auto s = std::make_unique<Stmt>();
    s->pos = peek().pos;
    if (is_kw("let")) {
      take();
      s->kind = Stmt::Kind::Let;
      s->name = expect_ident().text;
      expect_punct(":");
      s->declared = parse_type();
      expect_punct("=");
      s->value = parse_expr();
      expect_punct(";");
    } else if (is_kw("if")) {
      take();
      s->kind = Stmt::Kind::If;
      expect_punct("(");
      s->value = parse_expr();
      expect_punct(")");
      s->body = parse_block();
      if (is_kw("else")) {
        take();
        s->has_else = true;
        if (is_kw("if")) {
          s->else_body.push_back(parse_stmt());
        } else {
          s->else_body = parse_block();
        }
      }
    } else if (is_kw("while")) {
      take();
      s->kind = Stmt::Kind::While;
      expect_punct("(");
      s->value = parse_expr();
      expect_punct(")");
      s->body = parse_block();
    } else if (is_kw("return")) {
      take();
      s->kind = Stmt::Kind::Return;
      if (!is_punct(";")) s->value = parse_expr();
      expect_punct(";");
    } else if (is_punct("{")) {
      s->kind = Stmt::Kind::Block;
      s->body = parse_block();
    } else {
      ExprPtr e = parse_expr();
      if (is_punct("=")) {
        take();
        if (e->kind == Expr::Kind::Local) {
          s->kind = Stmt::Kind::AssignLocal;
          s->name = e->name;
        } else if (e->kind == Expr::Kind::Field) {
          s->kind = Stmt::Kind::AssignField;
          s->name = e->name;
          s->target = std::move(e->target);
        } else {
          throw SyntaxFailure{Diagnostic{ErrorCode::SyntaxError, e->pos, "invalid assignment target"}};
        }
        s->value = parse_expr();
      } else {
        s->kind = Stmt::Kind::ExprStmt;
        s->value = std::move(e);
      }
      expect_punct(";");
    }
    return s;
  }

  ExprPtr make(Expr::Kind kind, SourcePos pos) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->pos = pos;
    return e;
  }

  ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
    auto e = make(Expr::Kind::Binary, pos);
    e->binary_op = op;
    e->args.push_back(std::move(lhs));
    e->args.push_back(std::move(rhs));
    return e;
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (is_punct("||")) {
      auto pos = take().pos;
      lhs = binary(BinaryOp::Or, std::move(lhs), parse_and(), pos);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_equality();
    while (is_punct("&&")) {
      auto pos = take().pos;
      lhs = binary(BinaryOp::And, std::move(lhs), parse_equality(), pos);
    }
    return lhs;
  }

  ExprPtr parse_equality() {
    auto lhs = parse_relational();
    while (is_punct("==") || is_punct("!=")) {
      auto t = take();
      lhs = binary(t.text == "==" ? BinaryOp::Eq : BinaryOp::Ne, std::move(lhs), parse_relational(), t.pos);
    }
    return lhs;
  }

  ExprPtr parse_relational() {
    auto lhs = parse_additive();
    while (is_punct("<") || is_punct("<=") || is_punct(">") || is_punct(">=")) {
      auto t = take();
      BinaryOp op = t.text == "<" ? BinaryOp::Lt : t.text == "<=" ? BinaryOp::Le : t.text == ">" ? BinaryOp::Gt : BinaryOp::Ge;
      lhs = binary(op, std::move(lhs), parse_additive(), t.pos);
    }
    return lhs;
  }

  ExprPtr parse_additive() {
    auto lhs = parse_multiplicative();
    while (is_punct("+") || is_punct("-")) {
      auto t = take();
      lhs = binary(t.text == "+" ? BinaryOp::Add : BinaryOp::Sub, std::move(lhs), parse_multiplicative(), t.pos);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    auto lhs = parse_unary();
    while (is_punct("*") || is_punct("/") || is_punct("%")) {
      auto t = take();
      BinaryOp op = t.text == "*" ? BinaryOp::Mul : t.text == "/" ? BinaryOp::Div : BinaryOp::Mod;
      lhs = binary(op, std::move(lhs), parse_unary(), t.pos);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (is_punct("-") || is_punct("!")) {
      auto t = take();
      auto e = make(Expr::Kind::Unary, t.pos);
      e->unary_op = t.text == "-" ? UnaryOp::Neg : UnaryOp::Not;
      e->args.push_back(parse_unary());
      return e;
    }
    return parse_postfix();
  }

  std::vector<ExprPtr> parse_args() {
    expect_punct("(");
    std::vector<ExprPtr> args;
    if (!is_punct(")")) {
      while (true) {
        args.push_back(parse_expr());
        if (!is_punct(",")) break;
        take();
      }
    }
    expect_punct(")");
    return args;
  }

  ExprPtr parse_postfix() {
    auto e = parse_primary();
    while (is_punct(".")) {
      take();
      Token name = expect_ident();
      if (is_punct("(")) {
        auto call = make(Expr::Kind::MethodCall, name.pos);
        call->name = name.text;
        call->target = std::move(e);
        call->args = parse_args();
        e = std::move(call);
      } else {
        auto field = make(Expr::Kind::Field, name.pos);
        field->name = name.text;
        field->target = std::move(e);
        e = std::move(field);
      }
    }
    return e;
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    SourcePos pos = t.pos;
    switch (t.kind) {
      case Tok::Int: {
        auto e = make(Expr::Kind::Literal, pos);
        std::int64_t v = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc()) {
          throw SyntaxFailure{Diagnostic{ErrorCode::SyntaxError, pos, "integer literal out of range"}};
        }
        e->literal = v;
        take();
        return e;
      }
      case Tok::Float: {
        auto e = make(Expr::Kind::Literal, pos);
        e->literal = std::strtod(t.text.c_str(), nullptr);
        take();
        return e;
      }
      case Tok::String: {
        auto e = make(Expr::Kind::Literal, pos);
        e->literal = t.text;
        take();
        return e;
      }
      case Tok::Keyword: {
        if (t.text == "true" || t.text == "false") {
          auto e = make(Expr::Kind::Literal, pos);
          e->literal = t.text == "true";
          take();
          return e;
        }
        if (t.text == "null") {
          take();
          return make(Expr::Kind::Literal, pos);
        }
        if (t.text == "this") {
          take();
          return make(Expr::Kind::This, pos);
        }
        if (t.text == "new") {
          take();
          auto e = make(Expr::Kind::New, pos);
          e->name = expect_ident().text;
          e->args = parse_args();
          return e;
        }
        // Conversion builtins share their spelling with type keywords.
        if ((t.text == "int" || t.text == "float") && peek(1).kind == Tok::Punct && peek(1).text == "(") {
          auto e = make(Expr::Kind::BuiltinCall, pos);
          e->name = take().text;
          e->args = parse_args();
          return e;
        }
        break;
      }
      case Tok::Ident: {
        Token name = take();
        if (is_punct("(")) {
          // Resolved by the checker into a builtin or an implicit-this call.
          auto e = make(Expr::Kind::BuiltinCall, pos);
          e->name = name.text;
          e->args = parse_args();
          return e;
        }
        auto e = make(Expr::Kind::Local, pos);
        e->name = name.text;
        return e;
      }
      case Tok::Punct:
        if (t.text == "(") {
          take();
          auto e = parse_expr();
          expect_punct(")");
          return e;
        }
        break;
      default:
        break;
    }
    fail_expected({"expression"});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string join_messages(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "; ";
    out += d.to_string();
  }
  return out;
}

ErrorCode first_code(const std::vector<Diagnostic>& diags) {
  return diags.empty() ? ErrorCode::SyntaxError : diags.front().code;
}

}  // namespace

std::string Diagnostic::to_string() const {
  return std::string(error_code_name(code)) + " at " + format_pos(pos) + ": " + message;
}

ParseError::ParseError(std::vector<Diagnostic> diagnostics)
    : Error(first_code(diagnostics), join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

ParseOutcome parse_program(std::string_view source) {
  ParseOutcome out;
  std::vector<Token> tokens;
  detail::LexError lex_error;
  if (!detail::lex(source, tokens, lex_error)) {
    out.diagnostics.push_back({ErrorCode::SyntaxError, lex_error.pos, lex_error.message});
    return out;
  }
  try {
    out.program = Parser(std::move(tokens)).parse_program();
  } catch (const SyntaxFailure& f) {
    out.diagnostics.push_back(f.diag);
    return out;
  }
  detail::check_program(out.program, out.diagnostics);
  return out;
}

Program parse(std::string_view source) {
  ParseOutcome out = parse_program(source);
  if (!out.ok()) throw ParseError(std::move(out.diagnostics));
  return std::move(out.program);
}

}  // namespace psm::ml0
