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
#include <vector>

#include "psm/structure/static_model.hpp"

namespace psm::structure {

enum class VariableRole { Param, FlattenedParam, Read, CallReturn, Return, Property };

// One random variable of a node, named by the cell-naming convention shared
// by row assembly and network construction:
//   param.<name>                 scalar parameter
//   param.<Type>.<prop>          scalar property of an object parameter at entry
//                                (param.<name>.<prop> when two parameters share a type)
//   read.<Type>.<prop>           last value read within the frame
//   call<k>.<method>.ret         return value of call site k
//   return                       own return value
//   <prop>                       property / type-node variables
struct VariableSpec {
  std::string name;
  ScalarKind kind = ScalarKind::Float;
  VariableRole role = VariableRole::Param;
  std::string param;    // Param / FlattenedParam: parameter name
  std::string source;   // FlattenedParam / Read / Property: property id; CallReturn: callee id
  int site = -1;        // CallReturn
};

std::vector<VariableSpec> executable_variables(const StaticModel& model, const ExecutableInfo& exec);
std::vector<VariableSpec> type_variables(const TypeInfo& type);
std::vector<VariableSpec> property_variables(const PropertyInfo& prop);

std::string call_return_name(int site, const std::string& callee_id);

}  // namespace psm::structure
