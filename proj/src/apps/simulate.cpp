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
#include <set>

#include "common.hpp"
#include "psm/core/error.hpp"
#include "psm/core/rng.hpp"

namespace psm::apps {

using structure::VariableRole;

void SimulationConfig::validate() const {
  if (max_depth < 1) throw Error(ErrorCode::InvalidParams, "max_depth must be at least 1");
}

const NodeSimulation* SimulationResult::find(std::string_view node) const {
  for (const auto& s : nodes) {
    if (s.node == node) return &s;
  }
  return nullptr;
}

namespace {

struct Abandon {};

struct Visit {
  std::string node;
  int depth = 0;
  std::vector<Scalar> row;
};

class Simulator {
 public:
  Simulator(const network::ModelNetwork& net, const SimulationConfig& cfg, SimulationResult& out)
      : net_(net), cfg_(cfg), out_(out) {}

  // Appends the callee frames of one run below `caller`.
  void descend(const network::ModelNode& caller, const std::vector<Scalar>& row, int depth, Rng& rng,
               std::vector<Visit>& visits) {
    const auto* exec = net_.model().find_executable(caller.id);
    if (!exec) return;
    std::map<std::string, Scalar> values;
    const auto& vars = caller.density.variables();
    for (std::size_t j = 0; j < vars.size() && j < row.size(); ++j) values[vars[j].name] = row[j];
    for (const auto& site : exec->invokes) {
      const auto* callee = net_.find(site.callee);
      if (!callee || callee->kind != network::NodeKind::Executable) continue;
      if (!callee->fitted || callee->density.empty()) {
        warn("callee '" + site.callee + "' has no fitted model; not simulated");
        continue;
      }
      if (depth + 1 > cfg_.max_depth) {
        out_.truncated = true;
        warn("call depth capped at " + std::to_string(cfg_.max_depth));
        continue;
      }
      std::vector<density::Constraint> cs;
      for (const auto& v : callee->variables) {
        if (v.role != VariableRole::Param && v.role != VariableRole::FlattenedParam) continue;
        if (callee->density.index_of(v.name) < 0) continue;
        std::string src = caller_source(caller, v);
        auto it = values.find(src);
        if (src.empty() || it == values.end() || is_null(it->second)) {
          warn("no caller value for '" + callee->id + "' variable '" + v.name + "'; sampled from its model");
          continue;
        }
        cs.push_back(density::Constraint::at(v.name, detail::coerce(v.kind, it->second)));
      }
      density::Density d;
      try {
        d = density::condition(callee->density, cs);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroProbabilityCondition) throw;
        throw Abandon{};
      }
      auto drawn = density::sample(d, rng, 1);
      // Reorder into the callee's own column order.
      std::vector<Scalar> full(callee->density.variables().size());
      for (std::size_t j = 0; j < d.variables().size(); ++j) {
        full[static_cast<std::size_t>(callee->density.index_of(d.variables()[j].name))] = drawn[0][j];
      }
      for (const auto& c : cs) full[static_cast<std::size_t>(callee->density.index_of(c.variable))] = *c.point;
      visits.push_back({callee->id, depth + 1, full});
      descend(*callee, full, depth + 1, rng, visits);
    }
  }

  void commit(const std::vector<Visit>& visits) {
    for (const auto& v : visits) {
      auto [it, fresh] = index_.try_emplace(v.node, out_.nodes.size());
      if (fresh) {
        NodeSimulation s;
        s.node = v.node;
        s.depth = v.depth;
        for (const auto& var : net_.node(v.node).density.variables()) s.columns.push_back(var.name);
        out_.nodes.push_back(std::move(s));
      }
      out_.nodes[it->second].rows.push_back(v.row);
    }
  }

 private:
  void warn(const std::string& w) {
    if (warned_.insert(w).second) out_.warnings.push_back(w);
  }

  const network::ModelNetwork& net_;
  const SimulationConfig& cfg_;
  SimulationResult& out_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> warned_;
};

std::vector<density::Constraint> resolve_overrides(const network::ModelNode& entry,
                                                   const std::vector<density::Constraint>& overrides) {
  std::vector<density::Constraint> out;
  for (const auto& o : overrides) {
    std::vector<const structure::VariableSpec*> targets;
    if (const auto* v = entry.find_variable(o.variable)) {
      targets.push_back(v);
    } else {
      for (const auto& v : entry.variables) {
        if (v.name.size() > o.variable.size() && v.name.compare(v.name.size() - o.variable.size(), o.variable.size(), o.variable) == 0 &&
            v.name[v.name.size() - o.variable.size() - 1] == '.') {
          targets.push_back(&v);
        }
      }
    }
    if (targets.empty()) {
      throw Error(ErrorCode::UnknownVariable, "entry '" + entry.id + "' has no variable matching '" + o.variable + "'");
    }
    for (const auto* v : targets) {
      if (entry.density.index_of(v->name) < 0) {
        throw Error(ErrorCode::UnknownVariable, "variable '" + v->name + "' was never observed");
      }
      density::Constraint c = o;
      c.variable = v->name;
      if (c.point) c.point = detail::coerce(v->kind, *c.point);
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace

SimulationResult simulate(const network::ModelNetwork& net, const std::string& entry, const SimulationConfig& config) {
  config.validate();
  const auto& node = net.fitted_node(entry);
  if (node.kind != network::NodeKind::Executable) {
    throw Error(ErrorCode::InvalidParams, "simulation entry '" + entry + "' is not an executable");
  }
  if (node.density.empty()) throw Error(ErrorCode::InvalidParams, "entry '" + entry + "' has no variables");
  SimulationResult out;
  out.entry = entry;
  out.seed = config.seed;
  const auto overrides = resolve_overrides(node, config.overrides);
  density::Density start = density::condition(node.density, overrides);
  Simulator sim(net, config, out);
  Rng rng(config.seed);
  auto draws = density::sample(start, rng, config.n);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    std::vector<Scalar> row(node.density.variables().size());
    for (std::size_t j = 0; j < start.variables().size(); ++j) {
      row[static_cast<std::size_t>(node.density.index_of(start.variables()[j].name))] = draws[i][j];
    }
    for (const auto& c : overrides) {
      if (c.point) row[static_cast<std::size_t>(node.density.index_of(c.variable))] = *c.point;
    }
    Rng run = Rng(config.seed).split(i + 1);
    std::vector<Visit> visits{{entry, 0, row}};
    try {
      sim.descend(node, row, 0, run, visits);
    } catch (const Abandon&) {
      ++out.failed;
      continue;
    }
    sim.commit(visits);
    ++out.n;
  }
  if (out.nodes.empty()) {
    NodeSimulation head;
    head.node = entry;
    for (const auto& v : node.density.variables()) head.columns.push_back(v.name);
    out.nodes.push_back(std::move(head));
  }
  if (out.failed) {
    out.warnings.push_back(std::to_string(out.failed) + " runs abandoned on a zero-probability callee condition");
  }
  for (auto& s : out.nodes) {
    const auto& d = net.node(s.node).density;
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
      std::vector<Scalar> xs;
      for (const auto& r : s.rows) xs.push_back(r[j]);
      if (d.variables()[j].categorical) {
        s.histograms.push_back(network::categorical_histogram(s.columns[j], xs));
      } else {
        std::vector<double> ds;
        for (const auto& x : xs) {
          if (is_numeric(x)) ds.push_back(as_double(x));
        }
        s.histograms.push_back(network::numeric_histogram(s.columns[j], ds));
      }
    }
  }
  return out;
}

Json to_json(const SimulationResult& r, bool include_rows) {
  Json nodes = Json::array();
  for (const auto& s : r.nodes) {
    Json hs = Json::array();
    for (const auto& h : s.histograms) hs.push_back(network::to_json(h));
    Json jn{{"node", s.node}, {"depth", s.depth}, {"calls", s.rows.size()}, {"columns", s.columns}, {"histograms", hs}};
    if (include_rows) {
      Json rows = Json::array();
      for (const auto& row : s.rows) {
        Json jr = Json::array();
        for (const auto& x : row) jr.push_back(scalar_to_json(x));
        rows.push_back(jr);
      }
      jn["rows"] = rows;
    }
    nodes.push_back(jn);
  }
  return {{"entry", r.entry},         {"runs", r.n},    {"failed", r.failed}, {"truncated", r.truncated},
          {"seed", r.seed},           {"nodes", nodes}, {"warnings", r.warnings}};
}

}  // namespace psm::apps
