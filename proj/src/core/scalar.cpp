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


#include "psm/core/scalar.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "psm/core/error.hpp"

namespace psm {

std::string_view scalar_kind_name(ScalarKind kind) {
  switch (kind) {
    case ScalarKind::Int: return "int";
    case ScalarKind::Float: return "float";
    case ScalarKind::Bool: return "bool";
    case ScalarKind::String: return "string";
  }
  return "float";
}

std::optional<ScalarKind> scalar_kind_from_name(std::string_view name) {
  if (name == "int") return ScalarKind::Int;
  if (name == "float") return ScalarKind::Float;
  if (name == "bool") return ScalarKind::Bool;
  if (name == "string") return ScalarKind::String;
  return std::nullopt;
}

bool is_numeric(const Scalar& s) {
  return std::holds_alternative<std::int64_t>(s) || std::holds_alternative<double>(s) ||
         std::holds_alternative<bool>(s);
}

double as_double(const Scalar& s) {
  if (auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&s)) return *d;
  if (auto* b = std::get_if<bool>(&s)) return *b ? 1.0 : 0.0;
  throw Error(ErrorCode::KindMismatch, "expected a numeric value, got " + to_display(s));
}

std::optional<ScalarKind> kind_of(const Scalar& s) {
  switch (s.index()) {
    case 1: return ScalarKind::Int;
    case 2: return ScalarKind::Float;
    case 3: return ScalarKind::Bool;
    case 4: return ScalarKind::String;
    default: return std::nullopt;
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  std::string out(buf, res.ptr);
  if (out.find_first_of(".eE") == std::string::npos) out += ".0";
  return out;
}

std::string to_display(const Scalar& s) {
  switch (s.index()) {
    case 1: return std::to_string(std::get<std::int64_t>(s));
    case 2: return format_double(std::get<double>(s));
    case 3: return std::get<bool>(s) ? "true" : "false";
    case 4: return "\"" + std::get<std::string>(s) + "\"";
    default: return "null";
  }
}

Json scalar_to_json(const Scalar& s) {
  switch (s.index()) {
    case 1: return std::get<std::int64_t>(s);
    case 2: {
      double d = std::get<double>(s);
      if (!std::isfinite(d)) return format_double(d);
      return d;
    }
    case 3: return std::get<bool>(s);
    case 4: return std::get<std::string>(s);
    default: return nullptr;
  }
}

Scalar scalar_from_json(const Json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::KindMismatch, "not a scalar JSON value: " + j.dump());
}

}  // namespace psm
