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


#include <algorithm>
#include <map>
#include <set>

#include "common.hpp"
#include "psm/core/error.hpp"

namespace psm::apps {

using structure::VariableRole;

std::string_view compare_mode_name(CompareMode m) {
  return m == CompareMode::Integrity ? "integrity" : "compatibility";
}

CompareMode compare_mode_from_name(std::string_view name) {
  if (name == "integrity") return CompareMode::Integrity;
  if (name == "compatibility") return CompareMode::Compatibility;
  throw Error(ErrorCode::InvalidParams, "unknown compare mode '" + std::string(name) + "'");
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Compatible: return "compatible";
    case Verdict::Warning: return "warning";
    case Verdict::Divergent: return "divergent";
  }
  return "?";
}

Verdict CompareConfig::verdict(double d) const {
  if (d < compatible_below) return Verdict::Compatible;
  if (d < warning_below) return Verdict::Warning;
  return Verdict::Divergent;
}

void CompareConfig::validate() const {
  if (!(compatible_below > 0 && compatible_below <= warning_below && warning_below <= 1)) {
    throw Error(ErrorCode::InvalidParams, "verdict thresholds must satisfy 0 < compatible <= warning <= 1");
  }
}

namespace {

std::string usable(const network::ModelNode* n) {
  if (!n->fitted) return "unfitted";
  if (n->density.empty()) return "no variables";
  return "";
}

void integrity(const network::ModelNetwork& left, const network::ModelNetwork& right,
               CompareReport& out) {
  for (const auto& [id, ln] : left.nodes()) {
    const auto* rn = right.find(id);
    if (!rn) {
      out.removed.push_back(id);
      continue;
    }
    std::string why = usable(&ln);
    if (why.empty()) why = usable(rn);
    if (!why.empty()) {
      out.skipped.emplace_back(id, why);
      continue;
    }
    std::vector<std::string> shared;
    for (const auto& v : ln.density.variables()) {
      int j = rn->density.index_of(v.name);
      if (j >= 0 && rn->density.variables()[static_cast<std::size_t>(j)].categorical == v.categorical) {
        shared.push_back(v.name);
      }
    }
    if (shared.empty()) {
      out.skipped.emplace_back(id, "no shared variables");
      continue;
    }
    CompareEntry e;
    e.node = e.other_node = id;
    e.variables = shared;
    e.divergence = density::divergence(density::marginal(ln.density, shared), density::marginal(rn->density, shared));
    e.samples = ln.samples;
    e.other_samples = rn->samples;
    e.low_confidence = ln.low_confidence || rn->low_confidence;
    out.entries.push_back(std::move(e));
  }
  for (const auto& [id, rn] : right.nodes()) {
    if (!left.find(id)) out.added.push_back(id);
  }
}

void compatibility(const network::ModelNetwork& left, const network::ModelNetwork& right,
                   CompareReport& out) {
  std::set<std::pair<std::string, std::string>> done;
  for (const auto& exec : left.model().executables) {
    const auto* caller = left.find(exec.id);
    if (!caller || caller->kind != network::NodeKind::Executable) continue;
    for (const auto& site : exec.invokes) {
      if (!done.insert({exec.id, site.callee}).second) continue;
      const std::string label = exec.id + " -> " + site.callee;
      const auto* callee = right.find(site.callee);
      if (!callee || callee->kind != network::NodeKind::Executable) {
        out.skipped.emplace_back(label, "callee missing on the other side");
        continue;
      }
      std::string why = usable(caller);
      if (why.empty()) why = usable(callee);
      if (!why.empty()) {
        out.skipped.emplace_back(label, why);
        continue;
      }
      std::vector<std::string> from, to;
      std::map<std::string, std::string> names;
      for (const auto& v : callee->variables) {
        if (v.role != VariableRole::Param && v.role != VariableRole::FlattenedParam) continue;
        int j = callee->density.index_of(v.name);
        if (j < 0) continue;
        std::string src = caller_source(*caller, v);
        if (src.empty() || names.count(src)) continue;
        if (caller->density.variable(src).categorical != callee->density.variables()[static_cast<std::size_t>(j)].categorical) {
          continue;
        }
        from.push_back(src);
        to.push_back(v.name);
        names[src] = v.name;
      }
      if (from.empty()) {
        out.skipped.emplace_back(label, "no caller values match the callee parameters");
        continue;
      }
      CompareEntry e;
      e.node = exec.id;
      e.other_node = site.callee;
      e.variables = to;
      density::Density passed = density::rename(density::marginal(caller->density, from), names);
      e.divergence = density::divergence(passed, density::marginal(callee->density, to));
      e.samples = caller->samples;
      e.other_samples = callee->samples;
      e.low_confidence = caller->low_confidence || callee->low_confidence;
      out.entries.push_back(std::move(e));
    }
  }
}

}  // namespace

CompareReport compare(const network::ModelNetwork& left, const network::ModelNetwork& right,
                      const CompareConfig& config) {
  config.validate();
  CompareReport out;
  out.mode = config.mode;
  if (config.mode == CompareMode::Integrity) {
    integrity(left, right, out);
  } else {
    compatibility(left, right, out);
  }
  if (out.entries.empty()) {
    throw Error(ErrorCode::NoOverlap, std::string("nothing to compare in ") +
                                          std::string(compare_mode_name(config.mode)) + " mode");
  }
  for (auto& e : out.entries) {
    e.verdict = config.verdict(e.divergence);
    out.overall = std::max(out.overall, e.verdict);
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const CompareEntry& a, const CompareEntry& b) { return a.divergence > b.divergence; });
  return out;
}

Json to_json(const CompareReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"node", e.node},
                       {"other_node", e.other_node},
                       {"variables", e.variables},
                       {"divergence", e.divergence},
                       {"verdict", verdict_name(e.verdict)},
                       {"samples", e.samples},
                       {"other_samples", e.other_samples},
                       {"low_confidence", e.low_confidence}});
  }
  Json skipped = Json::array();
  for (const auto& [node, why] : r.skipped) skipped.push_back({{"node", node}, {"reason", why}});
  return {{"mode", compare_mode_name(r.mode)}, {"overall", verdict_name(r.overall)}, {"entries", entries},
          {"removed", r.removed},          {"added", r.added},         {"skipped", skipped}};
}

}  // namespace psm::apps
