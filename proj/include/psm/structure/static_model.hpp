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

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "psm/core/scalar.hpp"
#include "psm/minilang/ast.hpp"

namespace psm::structure {

// Declared kind of a property, parameter or return value: a scalar kind or a
// reference to a class.
struct ValueKind {
  std::optional<ScalarKind> scalar;
  std::string ref_type;

  bool is_scalar() const { return scalar.has_value(); }
  bool operator==(const ValueKind&) const = default;
};

struct PropertyInfo {
  std::string id;  // Type.name
  std::string name;
  ValueKind kind;

  // Scalar-typed properties are random variables; object-typed ones only
  // shape the structure.
  bool modelable() const { return kind.is_scalar(); }
  bool operator==(const PropertyInfo&) const = default;
};

struct TypeInfo {
  std::string id;
  std::vector<PropertyInfo> properties;
  bool external = false;

  const PropertyInfo* find_property(std::string_view name) const;
  bool operator==(const TypeInfo&) const = default;
};

struct ParamInfo {
  std::string name;
  ValueKind kind;
  bool operator==(const ParamInfo&) const = default;
};

struct CallSite {
  int site = 0;
  std::string callee;  // executable id
  bool operator==(const CallSite&) const = default;
};

struct ExecutableInfo {
  std::string id;     // Type.method; bare name for drivers
  std::string owner;  // owning type id; empty for drivers
  std::string name;
  std::vector<ParamInfo> params;
  std::optional<ValueKind> returns;  // nullopt: void
  std::set<std::string> reads;             // scalar property reads
  std::set<std::string> structural_reads;  // object-valued property reads
  std::vector<std::vector<std::string>> read_chains;  // a.b.c reads: property ids along the chain
  std::set<std::string> writes;
  std::vector<CallSite> invokes;  // ordered by site index
  bool external = false;          // drivers and anything outside the analyzed classes
  bool driver = false;

  bool operator==(const ExecutableInfo&) const = default;
};

enum class EdgeKind { ParamSource, Read, Write, Call, Owner };
std::string_view edge_kind_name(EdgeKind kind);

// Dependency edge. An endpoint outside the modeling universe is latent: the
// edge is kept but no variables are built for that endpoint.
struct Edge {
  EdgeKind kind = EdgeKind::Read;
  std::string from;
  std::string to;
  int site = -1;
  bool from_latent = false;
  bool to_latent = false;
  bool operator==(const Edge&) const = default;
};

struct StaticModel {
  std::vector<TypeInfo> types;              // sorted by id
  std::vector<ExecutableInfo> executables;  // sorted by id
  std::set<std::string> universe;           // type ids inside the modeling universe
  std::vector<Edge> edges;

  const TypeInfo* find_type(std::string_view id) const;
  const ExecutableInfo* find_executable(std::string_view id) const;
  const PropertyInfo* find_property(std::string_view id) const;
  bool in_universe(std::string_view type_id) const { return universe.count(std::string(type_id)) > 0; }
  bool executable_in_universe(const ExecutableInfo& e) const { return !e.external && in_universe(e.owner); }

  bool operator==(const StaticModel&) const = default;
};

StaticModel extract(const ml0::Program& program);

// Restricts the universe to types whose id matches any glob pattern
// (`*` and `?` wildcards). Throws EmptyUniverse when nothing matches.
StaticModel universe_filter(const StaticModel& model, const std::vector<std::string>& include_patterns);

bool glob_match(std::string_view pattern, std::string_view text);

Json to_json(const StaticModel& model);
StaticModel static_model_from_json(const Json& j);

}  // namespace psm::structure
