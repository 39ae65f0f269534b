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


#include "checker.hpp"

#include <map>
#include <set>

#include "psm/minilang/builtins.hpp"

namespace psm::ml0::detail {
namespace {

bool assignable(const Type& to, const Type& from) {
  if (to == from) return true;
  if (to.kind == Type::Kind::Float && from.kind == Type::Kind::Int) return true;
  if (to.kind == Type::Kind::Class && from.kind == Type::Kind::Null) return true;
  return false;
}

bool is_math_builtin(std::string_view n) {
  return n == "sqrt" || n == "exp" || n == "log" || n == "abs" || n == "float" || n == "int" || n == "min" ||
         n == "max";
}

class Checker {
 public:
  Checker(Program& program, std::vector<Diagnostic>& diags) : program_(program), diags_(diags) {}

  void run() {
    std::map<std::string, SourcePos> class_pos;
    for (const auto& cls : program_.classes) {
      auto [it, inserted] = class_pos.emplace(cls.name, cls.pos);
      if (!inserted) {
        error(ErrorCode::NameResolutionError, cls.pos,
              "duplicate class '" + cls.name + "' (first declared at " + format_pos(it->second) +
                  ", again at " + format_pos(cls.pos) + ")");
      }
    }
    std::map<std::string, SourcePos> driver_pos;
    for (const auto& d : program_.drivers) {
      auto [it, inserted] = driver_pos.emplace(d.fn.name, d.fn.pos);
      if (!inserted) {
        error(ErrorCode::NameResolutionError, d.fn.pos,
              "duplicate driver '" + d.fn.name + "' (first declared at " + format_pos(it->second) +
                  ", again at " + format_pos(d.fn.pos) + ")");
      }
    }

    for (auto& cls : program_.classes) check_class_decls(cls);
    for (auto& cls : program_.classes) {
      for (auto& f : cls.properties) {
        if (!f.init) continue;
        Scope scope;
        current_class_ = nullptr;
        site_counter_ = nullptr;
        Type t = check_expr(*f.init, scope);
        if (!assignable(f.type, t)) {
          error(ErrorCode::TypeError, f.init->pos,
                "initializer of '" + cls.name + "." + f.name + "' has type " + t.name() + ", expected " +
                    f.type.name());
        }
      }
      for (auto& m : cls.methods) check_method(m, &cls);
    }
    for (auto& d : program_.drivers) check_method(d.fn, nullptr);

    select_entry();
  }

 private:
  struct Scope {
    std::vector<std::map<std::string, Type>> frames{{}};
    const Type* find(const std::string& n) const {
      for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
        auto f = it->find(n);
        if (f != it->end()) return &f->second;
      }
      return nullptr;
    }
  };

  void error(ErrorCode code, SourcePos pos, std::string msg) { diags_.push_back({code, pos, std::move(msg)}); }

  bool resolve_type(const Type& t, SourcePos pos) {
    if (t.kind != Type::Kind::Class) return true;
    if (program_.find_class(t.class_name)) return true;
    error(ErrorCode::NameResolutionError, pos, "unknown type '" + t.class_name + "'");
    return false;
  }

  void check_class_decls(ClassDecl& cls) {
    std::map<std::string, SourcePos> members;
    auto add = [&](const std::string& name, SourcePos pos) {
      auto [it, inserted] = members.emplace(name, pos);
      if (!inserted) {
        error(ErrorCode::NameResolutionError, pos,
              "duplicate member '" + cls.name + "." + name + "' (first declared at " + format_pos(it->second) + ")");
      }
    };
    for (auto& f : cls.properties) {
      add(f.name, f.pos);
      resolve_type(f.type, f.pos);
    }
    for (auto& m : cls.methods) {
      add(m.name, m.pos);
      if (m.name == "init" && m.return_type.kind != Type::Kind::Void) {
        error(ErrorCode::TypeError, m.pos, "constructor '" + cls.name + ".init' must not return a value");
      }
    }
  }

  void check_method(MethodDecl& m, ClassDecl* cls) {
    current_class_ = cls;
    current_method_ = &m;
    int sites = 0;
    site_counter_ = &sites;
    Scope scope;
    std::set<std::string> names;
    for (auto& p : m.params) {
      if (!names.insert(p.name).second) {
        error(ErrorCode::NameResolutionError, p.pos, "duplicate parameter '" + p.name + "'");
      }
      resolve_type(p.type, p.pos);
      scope.frames.back()[p.name] = p.type;
    }
    resolve_type(m.return_type, m.pos);
    check_block(m.body, scope);
    if (m.return_type.kind != Type::Kind::Void && !returns(m.body)) {
      error(ErrorCode::TypeError, m.pos, "not every path of '" + m.name + "' ends in a return");
    }
    m.call_sites = sites;
    site_counter_ = nullptr;
  }

  static bool returns(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) {
      if (s->kind == Stmt::Kind::Return) return true;
      if (s->kind == Stmt::Kind::Block && returns(s->body)) return true;
      if (s->kind == Stmt::Kind::If && s->has_else && returns(s->body) && returns(s->else_body)) return true;
    }
    return false;
  }

  void check_block(std::vector<StmtPtr>& body, Scope& scope) {
    scope.frames.emplace_back();
    for (auto& s : body) check_stmt(*s, scope);
    scope.frames.pop_back();
  }

  void check_stmt(Stmt& s, Scope& scope) {
    switch (s.kind) {
      case Stmt::Kind::Let: {
        resolve_type(s.declared, s.pos);
        Type t = check_expr(*s.value, scope);
        if (!assignable(s.declared, t)) {
          error(ErrorCode::TypeError, s.value->pos,
                "cannot initialize '" + s.name + ": " + s.declared.name() + "' with " + t.name());
        }
        if (scope.frames.back().count(s.name)) {
          error(ErrorCode::NameResolutionError, s.pos, "'" + s.name + "' already declared in this block");
        }
        scope.frames.back()[s.name] = s.declared;
        break;
      }
      case Stmt::Kind::AssignLocal: {
        Type t = check_expr(*s.value, scope);
        const Type* var = scope.find(s.name);
        if (!var) {
          error(ErrorCode::NameResolutionError, s.pos, "unknown variable '" + s.name + "'");
        } else if (!assignable(*var, t)) {
          error(ErrorCode::TypeError, s.value->pos,
                "cannot assign " + t.name() + " to '" + s.name + ": " + var->name() + "'");
        }
        break;
      }
      case Stmt::Kind::AssignField: {
        Type target = check_expr(*s.target, scope);
        Type t = check_expr(*s.value, scope);
        if (const FieldDecl* f = field_of(target, s.name, s.pos)) {
          if (!assignable(f->type, t)) {
            error(ErrorCode::TypeError, s.value->pos,
                  "cannot assign " + t.name() + " to field '" + s.name + ": " + f->type.name() + "'");
          }
        }
        break;
      }
      case Stmt::Kind::If:
      case Stmt::Kind::While: {
        Type c = check_expr(*s.value, scope);
        if (c.kind != Type::Kind::Bool) error(ErrorCode::TypeError, s.value->pos, "condition must be bool, found " + c.name());
        check_block(s.body, scope);
        if (s.has_else) check_block(s.else_body, scope);
        break;
      }
      case Stmt::Kind::Return: {
        Type expected = current_method_->return_type;
        if (!s.value) {
          if (expected.kind != Type::Kind::Void) error(ErrorCode::TypeError, s.pos, "missing return value");
        } else {
          Type t = check_expr(*s.value, scope);
          if (expected.kind == Type::Kind::Void) {
            error(ErrorCode::TypeError, s.pos, "void executable returns a value");
          } else if (!assignable(expected, t)) {
            error(ErrorCode::TypeError, s.value->pos, "returns " + t.name() + ", declared " + expected.name());
          }
        }
        break;
      }
      case Stmt::Kind::ExprStmt:
        check_expr(*s.value, scope);
        break;
      case Stmt::Kind::Block:
        check_block(s.body, scope);
        break;
    }
  }

  const FieldDecl* field_of(const Type& target, const std::string& name, SourcePos pos) {
    if (target.kind != Type::Kind::Class) {
      if (target.kind != Type::Kind::Void) error(ErrorCode::TypeError, pos, "field access on non-object type " + target.name());
      return nullptr;
    }
    const ClassDecl* cls = program_.find_class(target.class_name);
    if (!cls) return nullptr;
    const FieldDecl* f = cls->find_property(name);
    if (!f) error(ErrorCode::NameResolutionError, pos, "class '" + cls->name + "' has no property '" + name + "'");
    return f;
  }

  void check_call_args(Expr& e, const std::vector<Param>& params, const std::string& what, Scope& scope) {
    std::vector<Type> arg_types;
    for (auto& a : e.args) arg_types.push_back(check_expr(*a, scope));
    if (arg_types.size() != params.size()) {
      error(ErrorCode::TypeError, e.pos,
            what + " expects " + std::to_string(params.size()) + " argument(s), got " + std::to_string(arg_types.size()));
      return;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (arg_types[i].kind == Type::Kind::Void) continue;
      if (!assignable(params[i].type, arg_types[i])) {
        error(ErrorCode::TypeError, e.args[i]->pos,
              "argument '" + params[i].name + "' of " + what + " expects " + params[i].type.name() + ", got " +
                  arg_types[i].name());
      }
    }
  }

  // Void doubles as "unknown" after an error so that one mistake does not
  // cascade into many diagnostics.
  Type check_expr(Expr& e, Scope& scope) {
    e.type = infer(e, scope);
    return e.type;
  }

  Type infer(Expr& e, Scope& scope) {
    using K = Expr::Kind;
    switch (e.kind) {
      case K::Literal: {
        if (auto k = kind_of(e.literal)) return Type::scalar(*k);
        return Type::null_type();
      }
      case K::Local: {
        if (const Type* t = scope.find(e.name)) return *t;
        error(ErrorCode::NameResolutionError, e.pos, "unknown variable '" + e.name + "'");
        return Type::void_type();
      }
      case K::This:
        if (!current_class_) {
          error(ErrorCode::NameResolutionError, e.pos, "'this' used outside a class");
          return Type::void_type();
        }
        return Type::class_type(current_class_->name);
      case K::Field: {
        Type target = check_expr(*e.target, scope);
        if (const FieldDecl* f = field_of(target, e.name, e.pos)) {
          e.owner = target.class_name;
          return f->type;
        }
        return Type::void_type();
      }
      case K::MethodCall: {
        int site = next_site();
        Type target = e.target ? check_expr(*e.target, scope) : Type::class_type(current_class_->name);
        if (target.kind != Type::Kind::Class) {
          if (target.kind != Type::Kind::Void) error(ErrorCode::TypeError, e.pos, "method call on non-object type " + target.name());
          for (auto& a : e.args) check_expr(*a, scope);
          return Type::void_type();
        }
        const ClassDecl* cls = program_.find_class(target.class_name);
        const MethodDecl* m = cls ? cls->find_method(e.name) : nullptr;
        if (!m || m->name == "init") {
          error(ErrorCode::NameResolutionError, e.pos, "class '" + target.class_name + "' has no method '" + e.name + "'");
          for (auto& a : e.args) check_expr(*a, scope);
          return Type::void_type();
        }
        e.owner = cls->name;
        e.site = site;
        check_call_args(e, m->params, "'" + cls->name + "." + m->name + "'", scope);
        return m->return_type;
      }
      case K::BuiltinCall:
        return infer_builtin(e, scope);
      case K::New: {
        const ClassDecl* cls = program_.find_class(e.name);
        if (!cls) {
          error(ErrorCode::NameResolutionError, e.pos, "unknown type '" + e.name + "'");
          for (auto& a : e.args) check_expr(*a, scope);
          return Type::void_type();
        }
        if (const MethodDecl* init = cls->find_method("init")) {
          e.site = next_site();
          e.owner = cls->name;
          check_call_args(e, init->params, "constructor of '" + cls->name + "'", scope);
        } else {
          check_call_args(e, {}, "constructor of '" + cls->name + "'", scope);
        }
        return Type::class_type(cls->name);
      }
      case K::Unary: {
        Type t = check_expr(*e.args[0], scope);
        if (t.kind == Type::Kind::Void) return t;
        if (e.unary_op == UnaryOp::Neg) {
          if (!t.is_numeric()) error(ErrorCode::TypeError, e.pos, "unary '-' needs a number, found " + t.name());
          return t.is_numeric() ? t : Type::void_type();
        }
        if (t.kind != Type::Kind::Bool) error(ErrorCode::TypeError, e.pos, "'!' needs bool, found " + t.name());
        return Type::scalar(ScalarKind::Bool);
      }
      case K::Binary:
        return infer_binary(e, scope);
    }
    return Type::void_type();
  }

  int next_site() { return site_counter_ ? (*site_counter_)++ : -1; }

  Type infer_binary(Expr& e, Scope& scope) {
    Type l = check_expr(*e.args[0], scope);
    Type r = check_expr(*e.args[1], scope);
    if (l.kind == Type::Kind::Void || r.kind == Type::Kind::Void) return Type::void_type();
    auto op = e.binary_op;
    auto bad = [&]() {
      error(ErrorCode::TypeError, e.pos,
            "operator '" + std::string(binary_op_text(op)) + "' not defined for " + l.name() + " and " + r.name());
      return Type::void_type();
    };
    switch (op) {
      case BinaryOp::Add:
        if (l.kind == Type::Kind::String || r.kind == Type::Kind::String) {
          if (!l.is_scalar() || !r.is_scalar()) return bad();
          return Type::scalar(ScalarKind::String);
        }
        [[fallthrough]];
      case BinaryOp::Sub:
      case BinaryOp::Mul:
      case BinaryOp::Div:
      case BinaryOp::Mod:
        if (!l.is_numeric() || !r.is_numeric()) return bad();
        return (l.kind == Type::Kind::Int && r.kind == Type::Kind::Int) ? Type::scalar(ScalarKind::Int)
                                                                        : Type::scalar(ScalarKind::Float);
      case BinaryOp::Lt:
      case BinaryOp::Le:
      case BinaryOp::Gt:
      case BinaryOp::Ge:
        if ((l.is_numeric() && r.is_numeric()) || (l.kind == Type::Kind::String && r.kind == Type::Kind::String)) {
          return Type::scalar(ScalarKind::Bool);
        }
        return bad();
      case BinaryOp::Eq:
      case BinaryOp::Ne: {
        bool ok = (l.is_numeric() && r.is_numeric()) || l == r ||
                  (l.kind == Type::Kind::Class && r.kind == Type::Kind::Null) ||
                  (l.kind == Type::Kind::Null && r.kind == Type::Kind::Class) ||
                  (l.kind == Type::Kind::Null && r.kind == Type::Kind::Null);
        if (!ok) return bad();
        return Type::scalar(ScalarKind::Bool);
      }
      case BinaryOp::And:
      case BinaryOp::Or:
        if (l.kind != Type::Kind::Bool || r.kind != Type::Kind::Bool) return bad();
        return Type::scalar(ScalarKind::Bool);
    }
    return bad();
  }

  Type infer_builtin(Expr& e, Scope& scope) {
    if (!is_sampler(e.name) && !is_math_builtin(e.name)) {
      if (current_class_ && current_class_->find_method(e.name) && e.name != "init") {
        // Implicit `this` call.
        e.kind = Expr::Kind::MethodCall;
        return infer(e, scope);
      }
      error(ErrorCode::NameResolutionError, e.pos, "unknown function '" + e.name + "'");
      for (auto& a : e.args) check_expr(*a, scope);
      return Type::void_type();
    }
    std::vector<Type> ts;
    for (auto& a : e.args) ts.push_back(check_expr(*a, scope));
    for (const auto& t : ts) {
      if (t.kind == Type::Kind::Void) return t;
    }
    auto arity = [&](std::size_t n) {
      if (ts.size() == n) return true;
      error(ErrorCode::TypeError, e.pos,
            "'" + e.name + "' expects " + std::to_string(n) + " argument(s), got " + std::to_string(ts.size()));
      return false;
    };
    auto numeric_args = [&]() {
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!ts[i].is_numeric()) {
          error(ErrorCode::TypeError, e.args[i]->pos, "'" + e.name + "' expects numeric arguments, got " + ts[i].name());
          return false;
        }
      }
      return true;
    };
    const Type f = Type::scalar(ScalarKind::Float);
    if (e.name == "normal" || e.name == "lognormal" || e.name == "uniform") {
      if (!arity(2) || !numeric_args()) return Type::void_type();
      return f;
    }
    if (e.name == "categorical") {
      if (ts.empty() || ts.size() % 2 != 0) {
        error(ErrorCode::TypeError, e.pos, "'categorical' expects value/weight pairs");
        return Type::void_type();
      }
      Type value = ts[0];
      for (std::size_t i = 0; i < ts.size(); i += 2) {
        if (!ts[i].is_scalar() || !(ts[i] == value)) {
          error(ErrorCode::TypeError, e.args[i]->pos, "'categorical' values must share one scalar type");
          return Type::void_type();
        }
        if (!ts[i + 1].is_numeric()) {
          error(ErrorCode::TypeError, e.args[i + 1]->pos, "'categorical' weights must be numeric");
          return Type::void_type();
        }
      }
      return value;
    }
    if (e.name == "min" || e.name == "max") {
      if (!arity(2) || !numeric_args()) return Type::void_type();
      return (ts[0].kind == Type::Kind::Int && ts[1].kind == Type::Kind::Int) ? ts[0] : f;
    }
    if (!arity(1) || !numeric_args()) return Type::void_type();
    if (e.name == "int") return Type::scalar(ScalarKind::Int);
    if (e.name == "abs") return ts[0];
    return f;
  }

  void select_entry() {
    if (program_.drivers.empty()) {
      error(ErrorCode::MissingEntry, SourcePos{}, "missing entry: the program declares no driver");
      return;
    }
    if (program_.find_driver("main")) {
      program_.entry = "main";
    } else if (program_.drivers.size() == 1) {
      program_.entry = program_.drivers.front().fn.name;
    } else {
      error(ErrorCode::MissingEntry, program_.drivers[1].fn.pos,
            "missing entry: several drivers and none named 'main'");
    }
  }

  Program& program_;
  std::vector<Diagnostic>& diags_;
  ClassDecl* current_class_ = nullptr;
  MethodDecl* current_method_ = nullptr;
  int* site_counter_ = nullptr;
};

}  // namespace

void check_program(Program& program, std::vector<Diagnostic>& diags) { Checker(program, diags).run(); }

}  // namespace psm::ml0::detail
