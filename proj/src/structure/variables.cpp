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


#include "psm/structure/variables.hpp"

#include <map>

namespace psm::structure {

std::string call_return_name(int site, const std::string& callee_id) {
  auto dot = callee_id.rfind('.');
  std::string method = dot == std::string::npos ? callee_id : callee_id.substr(dot + 1);
  return "call" + std::to_string(site) + "." + method + ".ret";
}

std::vector<VariableSpec> executable_variables(const StaticModel& model, const ExecutableInfo& exec) {
  std::vector<VariableSpec> vars;
  std::map<std::string, int> type_uses;
  for (const auto& p : exec.params) {
    if (!p.kind.is_scalar()) ++type_uses[p.kind.ref_type];
  }
  for (const auto& p : exec.params) {
    if (p.kind.is_scalar()) {
      vars.push_back({"param." + p.name, *p.kind.scalar, VariableRole::Param, p.name, {}, -1});
      continue;
    }
    const TypeInfo* t = model.find_type(p.kind.ref_type);
    if (!t) continue;
    std::string prefix = type_uses[t->id] > 1 ? "param." + p.name + "." : "param." + t->id + ".";
    for (const auto& prop : t->properties) {
      if (!prop.modelable()) continue;
      vars.push_back({prefix + prop.name, *prop.kind.scalar, VariableRole::FlattenedParam, p.name, prop.id, -1});
    }
  }
  for (const auto& r : exec.reads) {
    const PropertyInfo* prop = model.find_property(r);
    if (!prop || !prop->modelable()) continue;
    vars.push_back({"read." + r, *prop->kind.scalar, VariableRole::Read, {}, r, -1});
  }
  for (const auto& c : exec.invokes) {
    const ExecutableInfo* callee = model.find_executable(c.callee);
    if (!callee || !callee->returns || !callee->returns->is_scalar()) continue;
    vars.push_back({call_return_name(c.site, c.callee), *callee->returns->scalar, VariableRole::CallReturn, {}, c.callee, c.site});
  }
  if (exec.returns && exec.returns->is_scalar()) {
    vars.push_back({"return", *exec.returns->scalar, VariableRole::Return, {}, {}, -1});
  }
  return vars;
}

std::vector<VariableSpec> type_variables(const TypeInfo& type) {
  std::vector<VariableSpec> vars;
  for (const auto& p : type.properties) {
    if (p.modelable()) vars.push_back({p.name, *p.kind.scalar, VariableRole::Property, {}, p.id, -1});
  }
  return vars;
}

std::vector<VariableSpec> property_variables(const PropertyInfo& prop) {
  if (!prop.modelable()) return {};
  return {{prop.name, *prop.kind.scalar, VariableRole::Property, {}, prop.id, -1}};
}

}  // namespace psm::structure
