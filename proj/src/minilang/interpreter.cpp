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


#include "psm/minilang/interpreter.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "psm/core/error.hpp"
#include "psm/minilang/builtins.hpp"

namespace psm::ml0 {
namespace {

struct Object;
using ObjectPtr = std::shared_ptr<Object>;
using Value = std::variant<std::monostate, std::int64_t, double, bool, std::string, ObjectPtr>;

struct Object {
  std::uint64_t id = 0;
  const ClassDecl* cls = nullptr;
  std::vector<Value> fields;

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < cls->properties.size(); ++i) {
      if (cls->properties[i].name == name) return i;
    }
    return cls->properties.size();
  }
};

struct RuntimeFailure {
  std::string message;
};

struct Frame {
  std::uint64_t id = 0;
  std::uint64_t parent = 0;
  std::string exec_id;
  ObjectPtr self;
  std::vector<std::map<std::string, Value, std::less<>>> scopes;
  bool returned = false;
  Value ret;
};

Value default_value(const Type& t) {
  switch (t.kind) {
    case Type::Kind::Int: return std::int64_t{0};
    case Type::Kind::Float: return 0.0;
    case Type::Kind::Bool: return false;
    case Type::Kind::String: return std::string();
    default: return std::monostate{};
  }
}

Value coerce(Value v, const Type& to) {
  if (to.kind == Type::Kind::Float) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  }
  return v;
}

trace::TraceValue to_trace(const Value& v) {
  if (auto* o = std::get_if<ObjectPtr>(&v)) {
    if (!*o) return trace::TraceValue::of(Scalar{});
    return trace::TraceValue::of(trace::ObjectRef{(*o)->id, (*o)->cls->name});
  }
  switch (v.index()) {
    case 1: return trace::TraceValue::of(Scalar{std::get<std::int64_t>(v)});
    case 2: return trace::TraceValue::of(Scalar{std::get<double>(v)});
    case 3: return trace::TraceValue::of(Scalar{std::get<bool>(v)});
    case 4: return trace::TraceValue::of(Scalar{std::get<std::string>(v)});
    default: return trace::TraceValue::of(Scalar{});
  }
}

Scalar to_scalar(const Value& v) {
  switch (v.index()) {
    case 1: return std::get<std::int64_t>(v);
    case 2: return std::get<double>(v);
    case 3: return std::get<bool>(v);
    case 4: return std::get<std::string>(v);
    default: return std::monostate{};
  }
}

Value from_scalar(const Scalar& s) {
  switch (s.index()) {
    case 1: return std::get<std::int64_t>(s);
    case 2: return std::get<double>(s);
    case 3: return std::get<bool>(s);
    case 4: return std::get<std::string>(s);
    default: return std::monostate{};
  }
}

double num(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw RuntimeFailure{"expected a number"};
}

std::string text_of(const Value& v) {
  switch (v.index()) {
    case 1: return std::to_string(std::get<std::int64_t>(v));
    case 2: return format_double(std::get<double>(v));
    case 3: return std::get<bool>(v) ? "true" : "false";
    case 4: return std::get<std::string>(v);
    default: return "null";
  }
}

std::int64_t wrap(std::uint64_t v) { return static_cast<std::int64_t>(v); }

class Interpreter {
 public:
  Interpreter(const Program& program, const ExecOptions& options, trace::TraceLog& log)
      : program_(program), options_(options), writer_(log), rng_(options.seed) {}

  void run_iteration(const DriverDecl& driver) {
    steps_ = 0;
    try {
      std::vector<Value> no_args;
      invoke(driver.fn, driver.fn.name, nullptr, no_args, -1);
    } catch (const RuntimeFailure& f) {
      for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
        trace::TraceEvent e;
        e.kind = trace::EventKind::Abort;
        e.frame = it->id;
        e.parent = it->parent;
        e.exec_id = it->exec_id;
        e.error = f.message;
        writer_.append(std::move(e));
      }
      stack_.clear();
    }
  }

 private:
  Frame& frame() { return stack_.back(); }

  void tick() {
    if (++steps_ > options_.max_steps_per_iteration) throw RuntimeFailure{"step limit exceeded"};
  }

  void emit(trace::TraceEvent e) {
    e.frame = frame().id;
    e.parent = frame().parent;
    writer_.append(std::move(e));
  }

  Value invoke(const MethodDecl& m, const std::string& exec_id, ObjectPtr self, std::vector<Value>& args, int site) {
    if (stack_.size() >= options_.max_call_depth) throw RuntimeFailure{"call depth limit exceeded"};
    Frame f;
    f.id = ++next_frame_;
    f.parent = stack_.empty() ? 0 : frame().id;
    f.exec_id = exec_id;
    f.self = self;
    f.scopes.emplace_back();

    trace::TraceEvent enter;
    enter.kind = trace::EventKind::Enter;
    enter.frame = f.id;
    enter.parent = f.parent;
    enter.exec_id = exec_id;
    enter.site = site;
    enter.self = self ? self->id : 0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      args[i] = coerce(std::move(args[i]), m.params[i].type);
      enter.args.emplace_back(m.params[i].name, to_trace(args[i]));
      f.scopes.back()[m.params[i].name] = args[i];
    }
    writer_.append(std::move(enter));
    stack_.push_back(std::move(f));

    exec_block(m.body);

    Value ret = coerce(std::move(frame().ret), m.return_type);
    trace::TraceEvent exit;
    exit.kind = trace::EventKind::Exit;
    exit.exec_id = exec_id;
    exit.ret = to_trace(ret);
    emit(std::move(exit));
    stack_.pop_back();
    return ret;
  }

  void exec_block(const std::vector<StmtPtr>& body) {
    frame().scopes.emplace_back();
    for (const auto& s : body) {
      exec(*s);
      if (frame().returned) break;
    }
    frame().scopes.pop_back();
  }

  Value* lookup(std::string_view name) {
    auto& scopes = frame().scopes;
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  void exec(const Stmt& s) {
    tick();
    switch (s.kind) {
      case Stmt::Kind::Let:
        frame().scopes.back()[s.name] = coerce(eval(*s.value), s.declared);
        break;
      case Stmt::Kind::AssignLocal: {
        Value v = eval(*s.value);
        Value* slot = lookup(s.name);
        if (!slot) throw RuntimeFailure{"unknown variable " + s.name};
        if (std::holds_alternative<double>(*slot)) v = coerce(std::move(v), Type::scalar(ScalarKind::Float));
        *slot = std::move(v);
        break;
      }
      case Stmt::Kind::AssignField: {
        ObjectPtr obj = eval_object(*s.target, "write of field '" + s.name + "'");
        Value v = eval(*s.value);
        write_field(obj, s.name, std::move(v));
        break;
      }
      case Stmt::Kind::If:
        if (truthy(eval(*s.value))) {
          exec_block(s.body);
        } else if (s.has_else) {
          exec_block(s.else_body);
        }
        break;
      case Stmt::Kind::While:
        while (truthy(eval(*s.value))) {
          exec_block(s.body);
          if (frame().returned) break;
          tick();
        }
        break;
      case Stmt::Kind::Return:
        frame().ret = s.value ? eval(*s.value) : Value{};
        frame().returned = true;
        break;
      case Stmt::Kind::ExprStmt:
        eval(*s.value);
        break;
      case Stmt::Kind::Block:
        exec_block(s.body);
        break;
    }
  }

  static bool truthy(const Value& v) {
    if (auto* b = std::get_if<bool>(&v)) return *b;
    throw RuntimeFailure{"condition is not a bool"};
  }

  ObjectPtr eval_object(const Expr& e, const std::string& what) {
    Value v = eval(e);
    auto* o = std::get_if<ObjectPtr>(&v);
    if (!o || !*o) throw RuntimeFailure{"null object in " + what};
    return *o;
  }

  void write_field(const ObjectPtr& obj, const std::string& name, Value v) {
    std::size_t idx = obj->index_of(name);
    const FieldDecl& decl = obj->cls->properties.at(idx);
    v = coerce(std::move(v), decl.type);
    trace::TraceEvent e;
    e.kind = trace::EventKind::Write;
    e.prop_id = obj->cls->name + "." + name;
    e.obj_id = obj->id;
    e.value = to_trace(v);
    emit(std::move(e));
    obj->fields[idx] = std::move(v);
  }

  Value read_field(const ObjectPtr& obj, const std::string& name) {
    std::size_t idx = obj->index_of(name);
    const Value& v = obj->fields.at(idx);
    trace::TraceEvent e;
    e.kind = trace::EventKind::Read;
    e.prop_id = obj->cls->name + "." + name;
    e.obj_id = obj->id;
    e.value = to_trace(v);
    emit(std::move(e));
    return v;
  }

  Value eval(const Expr& e) {
    tick();
    using K = Expr::Kind;
    switch (e.kind) {
      case K::Literal:
        return from_scalar(e.literal);
      case K::Local: {
        Value* v = lookup(e.name);
        if (!v) throw RuntimeFailure{"unknown variable " + e.name};
        return *v;
      }
      case K::This:
        return frame().self;
      case K::Field: {
        ObjectPtr obj = eval_object(*e.target, "read of field '" + e.name + "'");
        return read_field(obj, e.name);
      }
      case K::MethodCall: {
        ObjectPtr recv = e.target ? eval_object(*e.target, "call of '" + e.name + "'") : frame().self;
        if (!recv) throw RuntimeFailure{"null receiver for '" + e.name + "'"};
        std::vector<Value> args;
        args.reserve(e.args.size());
        for (const auto& a : e.args) args.push_back(eval(*a));
        const MethodDecl* m = recv->cls->find_method(e.name);
        return invoke(*m, recv->cls->name + "." + m->name, recv, args, e.site);
      }
      case K::BuiltinCall:
        return eval_builtin(e);
      case K::New:
        return construct(e);
      case K::Unary: {
        Value v = eval(*e.args[0]);
        if (e.unary_op == UnaryOp::Not) return !truthy(v);
        if (auto* i = std::get_if<std::int64_t>(&v)) return wrap(0ULL - static_cast<std::uint64_t>(*i));
        return -num(v);
      }
      case K::Binary:
        return eval_binary(e);
    }
    throw RuntimeFailure{"unsupported expression"};
  }

  Value construct(const Expr& e) {
    std::vector<Value> args;
    for (const auto& a : e.args) args.push_back(eval(*a));
    const ClassDecl* cls = program_.find_class(e.name);
    auto obj = std::make_shared<Object>();
    obj->id = ++next_object_;
    obj->cls = cls;
    for (const auto& f : cls->properties) obj->fields.push_back(default_value(f.type));

    trace::TraceEvent ev;
    ev.kind = trace::EventKind::New;
    ev.type_id = cls->name;
    ev.obj_id = obj->id;
    emit(std::move(ev));

    for (const auto& f : cls->properties) {
      if (f.init) write_field(obj, f.name, eval(*f.init));
    }
    if (const MethodDecl* init = cls->find_method("init")) invoke(*init, cls->name + ".init", obj, args, e.site);
    return obj;
  }

  Value eval_builtin(const Expr& e) {
    std::vector<Value> vals;
    for (const auto& a : e.args) vals.push_back(eval(*a));
    if (is_sampler(e.name)) {
      std::vector<Scalar> params;
      for (const auto& v : vals) params.push_back(to_scalar(v));
      try {
        Value out = from_scalar(sample_builtin(e.name, params, rng_));
        return out;
      } catch (const Error& err) {
        throw RuntimeFailure{std::string(err.code_name()) + ": " + err.what()};
      }
    }
    const std::string& n = e.name;
    if (n == "min" || n == "max") {
      bool ints = std::holds_alternative<std::int64_t>(vals[0]) && std::holds_alternative<std::int64_t>(vals[1]);
      if (ints) {
        auto a = std::get<std::int64_t>(vals[0]);
        auto b = std::get<std::int64_t>(vals[1]);
        return n == "min" ? std::min(a, b) : std::max(a, b);
      }
      double a = num(vals[0]);
      double b = num(vals[1]);
      return n == "min" ? std::min(a, b) : std::max(a, b);
    }
    if (n == "abs") {
      if (auto* i = std::get_if<std::int64_t>(&vals[0])) {
        return *i < 0 ? wrap(0ULL - static_cast<std::uint64_t>(*i)) : *i;
      }
      return std::fabs(num(vals[0]));
    }
    double x = num(vals[0]);
    if (n == "float") return x;
    if (n == "int") {
      if (!std::isfinite(x) || std::fabs(x) >= 9.2e18) throw RuntimeFailure{"int(): value out of range"};
      return static_cast<std::int64_t>(x);
    }
    if (n == "sqrt") {
      if (x < 0) throw RuntimeFailure{"sqrt of a negative number"};
      return std::sqrt(x);
    }
    if (n == "log") {
      if (x <= 0) throw RuntimeFailure{"log of a non-positive number"};
      return std::log(x);
    }
    if (n == "exp") return std::exp(x);
    throw RuntimeFailure{"unknown builtin " + n};
  }

  static std::optional<int> compare(const Value& l, const Value& r) {
    if (auto* a = std::get_if<std::string>(&l)) {
      if (auto* b = std::get_if<std::string>(&r)) return a->compare(*b) < 0 ? -1 : (*a == *b ? 0 : 1);
      return std::nullopt;
    }
    if (auto* a = std::get_if<std::int64_t>(&l)) {
      if (auto* b = std::get_if<std::int64_t>(&r)) return *a < *b ? -1 : (*a == *b ? 0 : 1);
    }
    double a = num(l);
    double b = num(r);
    return a < b ? -1 : (a == b ? 0 : 1);
  }

  static bool equal(const Value& l, const Value& r) {
    auto null_like = [](const Value& v) {
      if (std::holds_alternative<std::monostate>(v)) return true;
      auto* o = std::get_if<ObjectPtr>(&v);
      return o && !*o;
    };
    if (null_like(l) || null_like(r)) return null_like(l) && null_like(r);
    if (auto* a = std::get_if<ObjectPtr>(&l)) {
      auto* b = std::get_if<ObjectPtr>(&r);
      return b && a->get() == b->get();
    }
    if (auto* a = std::get_if<bool>(&l)) return std::get<bool>(r) == *a;
    if (auto* a = std::get_if<std::string>(&l)) return std::get<std::string>(r) == *a;
    return compare(l, r) == 0;
  }

  Value eval_binary(const Expr& e) {
    if (e.binary_op == BinaryOp::And) return truthy(eval(*e.args[0])) && truthy(eval(*e.args[1]));
    if (e.binary_op == BinaryOp::Or) return truthy(eval(*e.args[0])) || truthy(eval(*e.args[1]));
    Value l = eval(*e.args[0]);
    Value r = eval(*e.args[1]);
    switch (e.binary_op) {
      case BinaryOp::Lt: return *compare(l, r) < 0;
      case BinaryOp::Le: return *compare(l, r) <= 0;
      case BinaryOp::Gt: return *compare(l, r) > 0;
      case BinaryOp::Ge: return *compare(l, r) >= 0;
      case BinaryOp::Eq: return equal(l, r);
      case BinaryOp::Ne: return !equal(l, r);
      default: break;
    }
    if (e.binary_op == BinaryOp::Add &&
        (std::holds_alternative<std::string>(l) || std::holds_alternative<std::string>(r))) {
      return text_of(l) + text_of(r);
    }
    auto* li = std::get_if<std::int64_t>(&l);
    auto* ri = std::get_if<std::int64_t>(&r);
    if (li && ri) {
      auto a = static_cast<std::uint64_t>(*li);
      auto b = static_cast<std::uint64_t>(*ri);
      switch (e.binary_op) {
        case BinaryOp::Add: return wrap(a + b);
        case BinaryOp::Sub: return wrap(a - b);
        case BinaryOp::Mul: return wrap(a * b);
        case BinaryOp::Div:
        case BinaryOp::Mod:
          if (*ri == 0) throw RuntimeFailure{"division by zero"};
          if (*li == std::numeric_limits<std::int64_t>::min() && *ri == -1) {
            return e.binary_op == BinaryOp::Div ? *li : std::int64_t{0};
          }
          return e.binary_op == BinaryOp::Div ? *li / *ri : *li % *ri;
        default: break;
      }
    }
    double a = num(l);
    double b = num(r);
    switch (e.binary_op) {
      case BinaryOp::Add: return a + b;
      case BinaryOp::Sub: return a - b;
      case BinaryOp::Mul: return a * b;
      case BinaryOp::Div:
        if (b == 0) throw RuntimeFailure{"division by zero"};
        return a / b;
      case BinaryOp::Mod:
        if (b == 0) throw RuntimeFailure{"division by zero"};
        return std::fmod(a, b);
      default: break;
    }
    throw RuntimeFailure{"unsupported operator"};
  }

  const Program& program_;
  const ExecOptions& options_;
  trace::TraceWriter writer_;
  Rng rng_;
  std::vector<Frame> stack_;
  std::uint64_t next_frame_ = 0;
  std::uint64_t next_object_ = 0;
  std::uint64_t steps_ = 0;
};

}  // namespace

trace::TraceLog execute(const Program& program, const ExecOptions& options) {
  if (options.iterations < 1) throw Error(ErrorCode::PreconditionError, "iterations must be >= 1");
  std::string entry = options.entry.empty() ? program.entry : options.entry;
  const DriverDecl* driver = program.find_driver(entry);
  if (!driver) {
    throw Error(ErrorCode::PreconditionError, entry.empty() ? "program has no entry driver"
                                                            : "unknown entry driver '" + entry + "'");
  }
  trace::TraceLog log;
  Interpreter interp(program, options, log);
  for (std::uint64_t i = 0; i < options.iterations; ++i) interp.run_iteration(*driver);
  return log;
}

}  // namespace psm::ml0
