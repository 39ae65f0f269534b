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


#include <map>

#include "common.hpp"
#include "psm/core/error.hpp"

namespace psm::apps {

void AnomalyConfig::validate() const {
  if (!(tau > 0 && tau <= 1)) throw Error(ErrorCode::InvalidParams, "tau must lie in (0, 1]");
}

namespace {

bool row_matches(const trace::ObservationRow& row, const Observation& obs) {
  for (const auto& [name, value] : obs.values) {
    auto it = row.cells.find(name);
    if (it == row.cells.end() || !detail::same_value(it->second, value)) return false;
  }
  return true;
}

bool in_scope(const AnomalyConfig& cfg, const std::string& id) {
  if (cfg.scope.empty()) return true;
  for (const auto& p : cfg.scope) {
    if (structure::glob_match(p, id)) return true;
  }
  return false;
}

// First frame of an in-network executable that sees the observed values.
const trace::FrameRecord* find_origin(const network::ModelNetwork& net, const Observation& obs,
                                      const network::ModelNode& node, const trace::Assembly& live) {
  auto executable = [&](const trace::FrameRecord& f) {
    const auto* n = net.find(f.exec_id);
    return n && n->kind == network::NodeKind::Executable;
  };
  if (node.kind == network::NodeKind::Executable) {
    for (const auto& f : live.frames) {
      if (f.exec_id == obs.node && !f.aborted && row_matches(f.row, obs)) return &f;
    }
    return nullptr;
  }
  auto it = live.rows.find(obs.node);
  if (it == live.rows.end()) return nullptr;
  std::uint64_t object = 0;
  for (const auto& r : it->second.rows) {
    if (row_matches(r, obs)) {
      object = r.obj_id;
      break;
    }
  }
  if (object == 0) return nullptr;
  for (const auto& f : live.frames) {
    if (executable(f) && (f.object_args.count(object) || f.objects_read.count(object))) return &f;
  }
  return nullptr;
}

}  // namespace

AnomalyReport check(const network::ModelNetwork& net, const Observation& obs, const AnomalyConfig& config,
                    const trace::Assembly* live) {
  config.validate();
  if (obs.values.empty()) throw Error(ErrorCode::InvalidParams, "observation has no values");
  const auto& node = net.fitted_node(obs.node);
  AnomalyReport r;
  r.observation = obs;
  r.tau = config.tau;
  std::vector<std::string> vars;
  std::vector<Scalar> values;
  for (auto& [name, value] : r.observation.values) {
    const auto* v = node.find_variable(name);
    if (!v || node.density.index_of(name) < 0) {
      throw Error(ErrorCode::UnknownVariable, "node '" + node.id + "' has no modeled variable '" + name + "'");
    }
    value = detail::coerce(v->kind, value);
    vars.push_back(name);
    values.push_back(value);
  }
  r.score = detail::score_values(node, vars, values);
  r.detected = r.score < config.tau;
  if (node.low_confidence) r.notes.push_back("node '" + node.id + "' is low-confidence");

  if (!live) {
    r.notes.push_back("no live run: ripple path not traced");
    return r;
  }
  const trace::FrameRecord* origin = find_origin(net, r.observation, node, *live);
  if (!origin) {
    r.notes.push_back("observed values not found in the live run");
    return r;
  }
  r.origin_frame = origin->frame;
  r.origin_executable = origin->exec_id;

  std::map<std::uint64_t, const trace::FrameRecord*> by_id;
  for (const auto& f : live->frames) by_id[f.frame] = &f;
  auto below_origin = [&](const trace::FrameRecord& f) {
    for (std::uint64_t p = f.parent; p != 0;) {
      if (p == origin->frame) return true;
      auto it = by_id.find(p);
      if (it == by_id.end()) return false;
      p = it->second->parent;
    }
    return false;
  };
  for (const auto& f : live->frames) {
    if (f.enter_seq <= origin->enter_seq || !below_origin(f)) continue;
    RippleStep step;
    step.node = f.exec_id;
    step.frame = f.frame;
    step.distance = f.depth - origin->depth;
    const auto* n = net.find(f.exec_id);
    if (n && n->fitted && !n->density.empty() && in_scope(config, f.exec_id)) {
      std::vector<Scalar> xs;
      for (const auto& [name, value] : f.row.cells) {
        if (is_null(value) || n->density.index_of(name) < 0) continue;
        step.variables.push_back(name);
        xs.push_back(value);
      }
      if (!step.variables.empty()) {
        step.score = detail::score_values(*n, step.variables, xs);
        step.detected = *step.score < config.tau;
        if (step.detected && !r.distance) r.distance = step.distance;
      }
    }
    r.ripple.push_back(std::move(step));
  }
  if (!r.distance) r.notes.push_back("never detected below the origin frame");
  return r;
}

Json to_json(const AnomalyReport& r) {
  Json values = Json::object();
  for (const auto& [name, value] : r.observation.values) values[name] = scalar_to_json(value);
  Json ripple = Json::array();
  for (const auto& s : r.ripple) {
    ripple.push_back({{"node", s.node},
                      {"frame", s.frame},
                      {"distance", s.distance},
                      {"score", s.score ? Json(*s.score) : Json(nullptr)},
                      {"detected", s.detected},
                      {"variables", s.variables}});
  }
  return {{"node", r.observation.node},
          {"values", values},
          {"tau", r.tau},
          {"score", r.score},
          {"detected", r.detected},
          {"origin_frame", r.origin_frame ? Json(*r.origin_frame) : Json(nullptr)},
          {"origin_executable", r.origin_executable},
          {"ripple", ripple},
          {"distance", r.distance ? Json(*r.distance) : Json(nullptr)},
          {"perceived", r.distance.has_value()},
          {"notes", r.notes}};
}

}  // namespace psm::apps
