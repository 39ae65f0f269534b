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


#include "psm/trace/assemble.hpp"

#include <unordered_map>

#include "psm/core/error.hpp"
#include "psm/structure/variables.hpp"

namespace psm::trace {
namespace {

using structure::VariableRole;
using structure::VariableSpec;

struct ObjectState {
  std::string type;
  std::map<std::string, Scalar> scalars;  // property name -> last written value
};

struct OpenFrame {
  std::size_t record = 0;  // index into Assembly::frames
  const std::vector<VariableSpec>* vars = nullptr;
  std::vector<std::uint64_t> dirty;  // objects written in this frame, first-write order
  std::uint64_t self = 0;
  bool constructor = false;
};

bool has_var(const std::vector<VariableSpec>& vars, const std::string& name) {
  for (const auto& v : vars) {
    if (v.name == name) return true;
  }
  return false;
}

[[noreturn]] void unresolved(const TraceEvent& e, const std::string& id) {
  throw Error(ErrorCode::UnresolvedId, "event seq " + std::to_string(e.seq) + " refers to unknown id '" + id + "'");
}

}  // namespace

Assembly assemble_frames(const TraceLog& log, const structure::StaticModel& model) {
  Assembly out;
  std::unordered_map<std::string, std::vector<VariableSpec>> exec_vars;
  for (const auto& e : model.executables) {
    exec_vars.emplace(e.id, e.driver ? std::vector<VariableSpec>{} : structure::executable_variables(model, e));
    out.rows[e.id];
  }
  for (const auto& t : model.types) {
    out.rows[t.id];
    for (const auto& p : t.properties) out.rows[p.id];
  }

  std::unordered_map<std::uint64_t, ObjectState> objects;
  std::vector<OpenFrame> stack;

  auto snapshot = [&](std::uint64_t obj_id, std::uint64_t frame) {
    auto it = objects.find(obj_id);
    if (it == objects.end()) return;
    const structure::TypeInfo* t = model.find_type(it->second.type);
    ObservationRow row;
    row.frame = frame;
    row.obj_id = obj_id;
    for (const auto& p : t->properties) {
      if (!p.modelable()) continue;
      auto v = it->second.scalars.find(p.name);
      if (v != it->second.scalars.end()) row.cells[p.name] = v->second;
    }
    out.rows[t->id].rows.push_back(std::move(row));
  };

  for (const auto& e : log.events) {
    switch (e.kind) {
      case EventKind::Enter: {
        const structure::ExecutableInfo* exec = model.find_executable(e.exec_id);
        if (!exec) unresolved(e, e.exec_id);
        FrameRecord rec;
        rec.frame = e.frame;
        rec.parent = e.parent;
        rec.exec_id = e.exec_id;
        rec.depth = static_cast<int>(stack.size());
        rec.site = e.site;
        rec.enter_seq = e.seq;
        rec.row.frame = e.frame;
        const auto& vars = exec_vars.at(e.exec_id);
        for (const auto& v : vars) {
          if (v.role != VariableRole::Param && v.role != VariableRole::FlattenedParam) continue;
          const TraceValue* arg = nullptr;
          for (const auto& [name, value] : e.args) {
            if (name == v.param) arg = &value;
          }
          if (!arg) continue;
          if (v.role == VariableRole::Param) {
            if (!is_null(arg->scalar)) rec.row.cells[v.name] = arg->scalar;
          } else if (arg->object) {
            auto obj = objects.find(arg->object->id);
            if (obj == objects.end()) continue;
            auto prop_name = v.source.substr(v.source.find('.') + 1);
            auto val = obj->second.scalars.find(prop_name);
            if (val != obj->second.scalars.end()) rec.row.cells[v.name] = val->second;
          }
        }
        for (const auto& [name, value] : e.args) {
          if (value.object) rec.object_args.insert(value.object->id);
        }
        OpenFrame open;
        open.record = out.frames.size();
        open.vars = &vars;
        open.self = e.self;
        open.constructor = exec->name == "init" && !exec->driver;
        out.frames.push_back(std::move(rec));
        stack.push_back(open);
        break;
      }
      case EventKind::Exit:
      case EventKind::Abort: {
        if (stack.empty()) throw Error(ErrorCode::OrphanFrame, "frame closed with no open frame");
        OpenFrame open = stack.back();
        stack.pop_back();
        FrameRecord& rec = out.frames[open.record];
        rec.close_seq = e.seq;
        const structure::ExecutableInfo* exec = model.find_executable(rec.exec_id);
        if (e.kind == EventKind::Abort) {
          rec.aborted = true;
          if (!exec->driver) ++out.rows[rec.exec_id].dropped_aborted;
          break;
        }
        if (has_var(*open.vars, "return") && !e.ret.is_object() && !is_null(e.ret.scalar)) {
          rec.row.cells["return"] = e.ret.scalar;
        }
        if (!stack.empty() && rec.site >= 0) {
          FrameRecord& parent = out.frames[stack.back().record];
          std::string name = structure::call_return_name(rec.site, rec.exec_id);
          if (has_var(*stack.back().vars, name) && !e.ret.is_object() && !is_null(e.ret.scalar)) {
            parent.row.cells[name] = e.ret.scalar;
          }
        }
        if (!exec->driver) out.rows[rec.exec_id].rows.push_back(rec.row);
        std::vector<std::uint64_t> snap = open.dirty;
        if (open.constructor && open.self != 0 && std::find(snap.begin(), snap.end(), open.self) == snap.end()) {
          snap.push_back(open.self);
        }
        for (auto obj : snap) snapshot(obj, rec.frame);
        break;
      }
      case EventKind::Read:
      case EventKind::Write: {
        const structure::PropertyInfo* prop = model.find_property(e.prop_id);
        if (!prop) unresolved(e, e.prop_id);
        if (stack.empty()) throw Error(ErrorCode::OrphanFrame, "event outside any frame");
        OpenFrame& open = stack.back();
        FrameRecord& rec = out.frames[open.record];
        if (e.kind == EventKind::Read) {
          rec.objects_read.insert(e.obj_id);
          std::string name = "read." + e.prop_id;
          if (prop->modelable() && has_var(*open.vars, name) && !is_null(e.value.scalar)) rec.row.cells[name] = e.value.scalar;
          break;
        }
        auto& state = objects[e.obj_id];
        if (state.type.empty()) state.type = e.prop_id.substr(0, e.prop_id.find('.'));
        if (prop->modelable() && !e.value.is_object()) {
          if (is_null(e.value.scalar)) {
            state.scalars.erase(prop->name);
          } else {
            state.scalars[prop->name] = e.value.scalar;
            ObservationRow row;
            row.frame = e.frame;
            row.obj_id = e.obj_id;
            row.cells[prop->name] = e.value.scalar;
            out.rows[prop->id].rows.push_back(std::move(row));
          }
        } else {
          ObservationRow row;
          row.frame = e.frame;
          row.obj_id = e.obj_id;
          out.rows[prop->id].rows.push_back(std::move(row));
        }
        if (std::find(open.dirty.begin(), open.dirty.end(), e.obj_id) == open.dirty.end()) open.dirty.push_back(e.obj_id);
        break;
      }
      case EventKind::New: {
        if (!model.find_type(e.type_id)) unresolved(e, e.type_id);
        objects[e.obj_id].type = e.type_id;
        break;
      }
    }
  }
  return out;
}

RowsByNode assemble(const TraceLog& log, const structure::StaticModel& model) {
  return assemble_frames(log, model).rows;
}

}  // namespace psm::trace
