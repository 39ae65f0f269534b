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


#include "psm/minilang/ast.hpp"

namespace psm::ml0 {

std::string format_pos(const SourcePos& pos) { return std::to_string(pos.line) + ":" + std::to_string(pos.column); }

Type Type::scalar(ScalarKind k) {
  switch (k) {
    case ScalarKind::Int: return {Kind::Int, {}};
    case ScalarKind::Float: return {Kind::Float, {}};
    case ScalarKind::Bool: return {Kind::Bool, {}};
    case ScalarKind::String: return {Kind::String, {}};
  }
  return {Kind::Void, {}};
}

std::optional<ScalarKind> Type::scalar_kind() const {
  switch (kind) {
    case Kind::Int: return ScalarKind::Int;
    case Kind::Float: return ScalarKind::Float;
    case Kind::Bool: return ScalarKind::Bool;
    case Kind::String: return ScalarKind::String;
    default: return std::nullopt;
  }
}

std::string Type::name() const {
  switch (kind) {
    case Kind::Void: return "void";
    case Kind::Null: return "null";
    case Kind::Class: return class_name;
    default: return std::string(scalar_kind_name(*scalar_kind()));
  }
}

std::string_view binary_op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

const FieldDecl* ClassDecl::find_property(std::string_view n) const {
  for (const auto& f : properties) {
    if (f.name == n) return &f;
  }
  return nullptr;
}

const MethodDecl* ClassDecl::find_method(std::string_view n) const {
  for (const auto& m : methods) {
    if (m.name == n) return &m;
  }
  return nullptr;
}

const ClassDecl* Program::find_class(std::string_view n) const {
  for (const auto& c : classes) {
    if (c.name == n) return &c;
  }
  return nullptr;
}

const DriverDecl* Program::find_driver(std::string_view n) const {
  for (const auto& d : drivers) {
    if (d.fn.name == n) return &d;
  }
  return nullptr;
}

}  // namespace psm::ml0
