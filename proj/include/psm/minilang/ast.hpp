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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psm/core/scalar.hpp"

namespace psm::ml0 {

struct SourcePos {
  int line = 1;
  int column = 1;
};

std::string format_pos(const SourcePos& pos);

// Static type of a declaration or expression.
struct Type {
  enum class Kind { Void, Null, Int, Float, Bool, String, Class };
  Kind kind = Kind::Void;
  std::string class_name;

  static Type void_type() { return {Kind::Void, {}}; }
  static Type null_type() { return {Kind::Null, {}}; }
  static Type scalar(ScalarKind k);
  static Type class_type(std::string name) { return {Kind::Class, std::move(name)}; }

  bool is_scalar() const {
    return kind == Kind::Int || kind == Kind::Float || kind == Kind::Bool || kind == Kind::String;
  }
  bool is_numeric() const { return kind == Kind::Int || kind == Kind::Float; }
  std::optional<ScalarKind> scalar_kind() const;
  std::string name() const;
  bool operator==(const Type&) const = default;
};

enum class BinaryOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnaryOp { Neg, Not };

std::string_view binary_op_text(BinaryOp op);

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind {
    Literal,      // literal
    Local,        // name
    This,
    Field,        // target.name
    MethodCall,   // target.name(args); target null for implicit `this`
    BuiltinCall,  // name(args)
    New,          // new name(args)
    Unary,
    Binary,
  };

  Kind kind = Kind::Literal;
  SourcePos pos;
  Scalar literal;
  std::string name;
  ExprPtr target;
  std::vector<ExprPtr> args;
  UnaryOp unary_op = UnaryOp::Neg;
  BinaryOp binary_op = BinaryOp::Add;

  // Filled in by the checker.
  Type type;
  std::string owner;     // Field: declaring class; MethodCall: callee class
  int site = -1;         // MethodCall: call-site index within the enclosing executable
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
  enum class Kind { Let, AssignLocal, AssignField, If, While, Return, ExprStmt, Block };

  Kind kind = Kind::ExprStmt;
  SourcePos pos;
  std::string name;  // Let / AssignLocal: variable; AssignField: field name
  Type declared;     // Let
  ExprPtr target;    // AssignField: object expression
  ExprPtr value;     // Let / Assign / Return (optional) / ExprStmt / If,While condition
  std::vector<StmtPtr> body;       // Block, If-then, While
  std::vector<StmtPtr> else_body;  // If
  bool has_else = false;
};

struct Param {
  std::string name;
  Type type;
  SourcePos pos;
};

struct FieldDecl {
  std::string name;
  Type type;
  ExprPtr init;
  SourcePos pos;
};

struct MethodDecl {
  std::string name;
  std::vector<Param> params;
  Type return_type;
  std::vector<StmtPtr> body;
  SourcePos pos;
  int call_sites = 0;  // number of call-site indices assigned by the checker
};

struct ClassDecl {
  std::string name;
  std::vector<FieldDecl> properties;
  std::vector<MethodDecl> methods;
  SourcePos pos;

  const FieldDecl* find_property(std::string_view n) const;
  const MethodDecl* find_method(std::string_view n) const;
};

// A zero-argument driver function; drivers are the workload that exercises
// the classes and sit outside the modeled classes.
struct DriverDecl {
  MethodDecl fn;
};

struct Program {
  std::vector<ClassDecl> classes;
  std::vector<DriverDecl> drivers;
  std::string entry;

  const ClassDecl* find_class(std::string_view n) const;
  const DriverDecl* find_driver(std::string_view n) const;
};

}  // namespace psm::ml0
