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
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace psm {

using Json = nlohmann::json;

enum class ScalarKind { Int, Float, Bool, String };

std::string_view scalar_kind_name(ScalarKind kind);
std::optional<ScalarKind> scalar_kind_from_name(std::string_view name);

// A runtime value that can be a random variable. `std::monostate` is the
// null/missing value.
using Scalar = std::variant<std::monostate, std::int64_t, double, bool, std::string>;

inline bool is_null(const Scalar& s) { return std::holds_alternative<std::monostate>(s); }
bool is_numeric(const Scalar& s);
// Numeric view of int/float/bool values; throws KindMismatch for strings/null.
double as_double(const Scalar& s);
std::optional<ScalarKind> kind_of(const Scalar& s);

// Compact human-readable rendering ("abc" for strings, 1.5, 3, true).
std::string to_display(const Scalar& s);

Json scalar_to_json(const Scalar& s);
Scalar scalar_from_json(const Json& j);

// Shortest decimal text that parses back to exactly `value`; always carries
// a decimal point or exponent so it reads back as a float.
std::string format_double(double value);

}  // namespace psm
