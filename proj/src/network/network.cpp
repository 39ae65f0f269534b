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

#include "psm/network/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <set>

#include "psm/core/error.hpp"
#include "psm/core/hash.hpp"
#include "psm/core/rng.hpp"

namespace psm::network {

using density::kInf;
using structure::VariableRole;
using structure::VariableSpec;

namespace {

const char* role_name(VariableRole r) {
  switch (r) {
    case VariableRole::Param: return "param";
    case VariableRole::FlattenedParam: return "flattened_param";
    case VariableRole::Read: return "read";
    case VariableRole::CallReturn: return "call_return";
    case VariableRole::Return: return "return";
    case VariableRole::Property: return "property";
  }
  return "param";
}

NodeKind kind_from_name(const std::string& s) {
  if (s == "property") return NodeKind::Property;
  if (s == "type") return NodeKind::Type;
  if (s == "executable") return NodeKind::Executable;
  throw Error(ErrorCode::SchemaMismatch, "unknown node kind '" + s + "'");
}

void add_node(std::map<std::string, ModelNode>& nodes, ModelNode n) {
  auto id = n.id;
  if (!nodes.emplace(id, std::move(n)).second) {
    throw Error(ErrorCode::SchemaMismatch, "duplicate node id '" + id + "'");
  }
}

Json double_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::string_view node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Property: return "property";
    case NodeKind::Type: return "type";
    case NodeKind::Executable: return "executable";
  }
  return "type";
}

Histogram numeric_histogram(std::string variable, const std::vector<double>& xs, double lo, double hi, int bins) {
  Histogram h;
  h.variable = std::move(variable);
  h.lo = lo;
  h.hi = hi;
  h.mass.assign(static_cast<std::size_t>(bins), 0.0);
  const double w = (hi - lo) / bins;
  for (double x : xs) {
    if (!std::isfinite(x)) continue;
    auto b = static_cast<long>(std::floor((x - lo) / w));
    b = std::clamp<long>(b, 0, bins - 1);
    h.mass[static_cast<std::size_t>(b)] += 1;
    ++h.count;
  }
  if (h.count > 0) {
    for (auto& m : h.mass) m /= static_cast<double>(h.count);
  }
  return h;
}

Histogram numeric_histogram(std::string variable, const std::vector<double>& xs, int bins) {
  double lo = kInf, hi = -kInf;
  for (double x : xs) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (!std::isfinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (!(hi > lo)) {
    double pad = 0.5 * std::max(1e-9, std::abs(lo) * 1e-6);
    lo -= pad;
    hi += pad;
  }
  return numeric_histogram(std::move(variable), xs, lo, hi, bins);
}

Histogram categorical_histogram(std::string variable, const std::vector<Scalar>& xs) {
  Histogram h;
  h.variable = std::move(variable);
  h.categorical = true;
  std::map<std::string, std::pair<Scalar, double>> counts;  // keyed by JSON text for a stable order
  for (const auto& x : xs) {
    if (is_null(x)) continue;
    auto& slot = counts[scalar_to_json(x).dump()];
    slot.first = x;
    slot.second += 1;
    ++h.count;
  }
  std::vector<std::pair<Scalar, double>> sorted;
  for (auto& [k, v] : counts) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    bool na = is_numeric(a.first), nb = is_numeric(b.first);
    if (na && nb) return as_double(a.first) < as_double(b.first);
    if (na != nb) return na;
    return scalar_to_json(a.first).dump() < scalar_to_json(b.first).dump();
  });
  for (auto& [v, c] : sorted) {
    h.values.push_back(v);
    h.mass.push_back(c / static_cast<double>(h.count));
  }
  return h;
}

const VariableSpec* ModelNode::find_variable(std::string_view name) const {
  for (const auto& v : variables) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

const ModelNode* ModelNetwork::find(std::string_view id) const {
  auto it = nodes_.find(std::string(id));
  return it == nodes_.end() ? nullptr : &it->second;
}

const ModelNode& ModelNetwork::node(std::string_view id) const {
  const ModelNode* n = find(id);
  if (!n) throw Error(ErrorCode::UnknownNode, "unknown node '" + std::string(id) + "'");
  return *n;
}

const ModelNode& ModelNetwork::fitted_node(std::string_view id, bool allow_low_confidence) const {
  const ModelNode& n = node(id);
  if (!n.fitted) {
    throw Error(ErrorCode::UnfittedNode, "node '" + n.id + "' has no fitted density (" + std::to_string(n.samples) +
                                             " samples)");
  }
  if (n.low_confidence && !allow_low_confidence) {
    throw Error(ErrorCode::UnfittedNode, "node '" + n.id + "' is low-confidence (" + std::to_string(n.samples) +
                                             " samples); pass the low-confidence override to use it");
  }
  return n;
}

ModelNetwork build(const structure::StaticModel& model) {
  ModelNetwork net;
  net.model_ = model;
  for (const auto& t : model.types) {
    if (t.external || !model.in_universe(t.id)) continue;
    add_node(net.nodes_, {t.id, NodeKind::Type, structure::type_variables(t), {}, false, false, 0, {}});
    for (const auto& p : t.properties) {
      add_node(net.nodes_, {p.id, NodeKind::Property, structure::property_variables(p), {}, false, false, 0, {}});
    }
  }
  for (const auto& e : model.executables) {
    if (e.driver || !model.executable_in_universe(e)) continue;
    add_node(net.nodes_,
             {e.id, NodeKind::Executable, structure::executable_variables(model, e), {}, false, false, 0, {}});
  }
  return net;
}

density::Dataset dataset_for(const ModelNode& node, const trace::NodeRows& rows) {
  density::Dataset d;
  std::map<std::string, std::size_t> column;
  for (const auto& v : node.variables) {
    column[v.name] = d.columns.size();
    d.columns.push_back({v.name, v.kind});
  }
  for (const auto& r : rows.rows) {
    std::vector<Scalar> row(d.columns.size());
    for (const auto& [name, value] : r.cells) {
      auto it = column.find(name);
      if (it == column.end()) {
        throw Error(ErrorCode::SchemaMismatch, "row for node '" + node.id + "' has unknown variable '" + name + "'");
      }
      Scalar v = value;
      if (d.columns[it->second].kind == ScalarKind::Float && std::holds_alternative<std::int64_t>(v)) {
        v = static_cast<double>(std::get<std::int64_t>(v));
      }
      row[it->second] = std::move(v);
    }
    d.rows.push_back(std::move(row));
  }
  return d;
}

FitReport fit_all(ModelNetwork& net, const trace::RowsByNode& rows, const density::FitConfig& config,
                  std::uint64_t seed) {
  config.validate();
  for (const auto& [id, r] : rows) {
    (void)r;
    if (net.find(id)) continue;
    const auto* e = net.model_.find_executable(id);
    const auto* t = net.model_.find_type(id);
    const auto* p = net.model_.find_property(id);
    if (!e && !t && !p) throw Error(ErrorCode::SchemaMismatch, "rows reference unknown node '" + id + "'");
  }
  FitReport report;
  report.seed = seed;
  report.config = config;
  const trace::NodeRows none;
  for (auto& [id, node] : net.nodes_) {
    auto it = rows.find(id);
    const trace::NodeRows& nr = it == rows.end() ? none : it->second;
    density::Dataset data = dataset_for(node, nr);
    FitReportEntry entry;
    entry.node = id;
    entry.kind = node.kind;
    entry.samples = data.rows.size();
    entry.dropped_aborted = nr.dropped_aborted;
    node.samples = data.rows.size();
    node.density = density::Density();
    node.fitted = false;
    node.low_confidence = false;
    node.observed.clear();
    std::uint64_t node_seed = Rng(seed).split(fnv1a64(id)).next_u64();
    if (node.variables.empty()) {
      node.fitted = true;
      entry.fitted = true;
      entry.converged = true;
    } else if (data.rows.empty()) {
      node.low_confidence = true;
      entry.low_confidence = true;
      entry.warnings.push_back("no observations; node left unfitted");
    } else {
      try {
        node.density = density::fit(data, config, node_seed);
        node.fitted = true;
        const auto& info = node.density.info();
        node.low_confidence = info.low_confidence;
        entry.fitted = true;
        entry.low_confidence = info.low_confidence;
        entry.converged = info.converged;
        entry.k = info.k;
        entry.bic = info.bic;
        entry.warnings = info.warnings;
        if (info.low_confidence) {
          entry.warnings.push_back("fewer than " + std::to_string(config.min_samples) +
                                   " samples; kernel estimate used");
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoData) throw;
        node.low_confidence = true;
        entry.low_confidence = true;
        entry.warnings.push_back(std::string("not fitted: ") + e.what());
      }
    }
    for (std::size_t j = 0; j < node.variables.size(); ++j) {
      const auto& v = node.variables[j];
      int di = node.density.index_of(v.name);
      bool cat = v.kind == ScalarKind::Bool || v.kind == ScalarKind::String ||
                 (di >= 0 && node.density.variables()[static_cast<std::size_t>(di)].categorical);
      if (cat) {
        std::vector<Scalar> xs;
        for (const auto& r : data.rows) xs.push_back(r[j]);
        node.observed.push_back(categorical_histogram(v.name, xs));
      } else {
        std::vector<double> xs;
        for (const auto& r : data.rows) {
          if (!is_null(r[j])) xs.push_back(as_double(r[j]));
        }
        node.observed.push_back(numeric_histogram(v.name, xs));
      }
    }
    report.entries.push_back(std::move(entry));
  }
  net.report_ = report;
  return report;
}

std::vector<DownstreamEntry> downstream(const ModelNetwork& net, std::string_view id) {
  const ModelNode& origin = net.node(id);
  if (origin.kind != NodeKind::Executable) return {};
  auto callees = [&](const std::string& exec) {
    std::vector<std::string> out;
    const auto* e = net.model().find_executable(exec);
    if (!e) return out;
    for (const auto& c : e->invokes) {
      const ModelNode* n = net.find(c.callee);
      if (n && n->kind == NodeKind::Executable) out.push_back(c.callee);
    }
    return out;
  };
  // depth by breadth-first search, discovery order breaks ties
  std::map<std::string, int> depth;
  std::vector<std::string> order;
  std::deque<std::string> queue{origin.id};
  depth[origin.id] = 0;
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    for (const auto& c : callees(cur)) {
      if (depth.count(c)) continue;
      depth[c] = depth[cur] + 1;
      order.push_back(c);
      queue.push_back(c);
    }
  }
  // back edges mark recursion; the callee is not expanded again
  std::set<std::string> cyclic, on_path, done;
  std::function<void(const std::string&)> dfs = [&](const std::string& cur) {
    on_path.insert(cur);
    for (const auto& c : callees(cur)) {
      if (on_path.count(c)) {
        cyclic.insert(c);
        continue;
      }
      if (!done.count(c)) dfs(c);
    }
    on_path.erase(cur);
    done.insert(cur);
  };
  dfs(origin.id);
  std::vector<DownstreamEntry> out;
  if (cyclic.count(origin.id)) {
    // the origin reappears one frame below its deepest caller on the cycle
    int d = 1;
    for (const auto& [n, dep] : depth) {
      auto cs = callees(n);
      if (std::find(cs.begin(), cs.end(), origin.id) != cs.end()) d = std::max(d, dep + 1);
    }
    out.push_back({origin.id, d, true});
  }
  for (const auto& n : order) out.push_back({n, depth[n], cyclic.count(n) > 0});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.depth < b.depth; });
  return out;
}

Json to_json(const Histogram& h) {
  Json j{{"variable", h.variable}, {"categorical", h.categorical}, {"count", h.count}, {"mass", h.mass}};
  if (h.categorical) {
    Json vals = Json::array();
    for (const auto& v : h.values) vals.push_back(scalar_to_json(v));
    j["values"] = vals;
  } else {
    j["lo"] = h.lo;
    j["hi"] = h.hi;
  }
  return j;
}

Histogram histogram_from_json(const Json& j) {
  try {
    Histogram h;
    h.variable = j.at("variable").get<std::string>();
    h.categorical = j.at("categorical").get<bool>();
    h.count = j.at("count").get<std::size_t>();
    h.mass = j.at("mass").get<std::vector<double>>();
    if (h.categorical) {
      for (const auto& v : j.at("values")) h.values.push_back(scalar_from_json(v));
    } else {
      h.lo = j.at("lo").get<double>();
      h.hi = j.at("hi").get<double>();
    }
    return h;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad histogram: ") + e.what());
  }
}

Json config_to_json(const density::FitConfig& c) {
  return {{"kmax", c.kmax},
          {"tolerance", c.tolerance},
          {"max_iterations", c.max_iterations},
          {"restarts", c.restarts},
          {"regularization", c.regularization},
          {"categorical_max_distinct", c.categorical_max_distinct},
          {"alpha", c.alpha},
          {"min_samples", c.min_samples},
          {"full_covariance_max_dim", c.full_covariance_max_dim},
          {"bic_patience", c.bic_patience}};
}

density::FitConfig config_from_json(const Json& j) {
  density::FitConfig c;
  c.kmax = j.at("kmax").get<int>();
  c.tolerance = j.at("tolerance").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.restarts = j.at("restarts").get<int>();
  c.regularization = j.at("regularization").get<double>();
  c.categorical_max_distinct = j.at("categorical_max_distinct").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.min_samples = j.at("min_samples").get<int>();
  c.full_covariance_max_dim = j.at("full_covariance_max_dim").get<int>();
  c.bic_patience = j.value("bic_patience", 0);
  return c;
}

Json to_json(const FitReport& report) {
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    Json bic = Json::array();
    for (double b : e.bic) bic.push_back(double_or_null(b));
    entries.push_back({{"node", e.node},
                       {"kind", node_kind_name(e.kind)},
                       {"samples", e.samples},
                       {"dropped_aborted", e.dropped_aborted},
                       {"fitted", e.fitted},
                       {"low_confidence", e.low_confidence},
                       {"converged", e.converged},
                       {"k", e.k},
                       {"bic", bic},
                       {"warnings", e.warnings}});
  }
  return {{"seed", report.seed}, {"config", config_to_json(report.config)}, {"nodes", entries}};
}

FitReport report_from_json(const Json& j) {
  FitReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = config_from_json(j.at("config"));
  for (const auto& je : j.at("nodes")) {
    FitReportEntry e;
    e.node = je.at("node").get<std::string>();
    e.kind = kind_from_name(je.at("kind").get<std::string>());
    e.samples = je.at("samples").get<std::size_t>();
    e.dropped_aborted = je.at("dropped_aborted").get<std::size_t>();
    e.fitted = je.at("fitted").get<bool>();
    e.low_confidence = je.at("low_confidence").get<bool>();
    e.converged = je.at("converged").get<bool>();
    e.k = je.at("k").get<int>();
    for (const auto& b : je.at("bic")) e.bic.push_back(b.is_null() ? std::nan("") : b.get<double>());
    e.warnings = je.at("warnings").get<std::vector<std::string>>();
    r.entries.push_back(std::move(e));
  }
  return r;
}

Json to_json(const ModelNetwork& net) {
  Json nodes = Json::array();
  for (const auto& [id, n] : net.nodes()) {
    Json vars = Json::array();
    for (const auto& v : n.variables) {
      Json jv{{"name", v.name}, {"kind", scalar_kind_name(v.kind)}, {"role", role_name(v.role)}};
      if (!v.param.empty()) jv["param"] = v.param;
      if (!v.source.empty()) jv["source"] = v.source;
      if (v.site >= 0) jv["site"] = v.site;
      vars.push_back(jv);
    }
    Json observed = Json::array();
    for (const auto& h : n.observed) observed.push_back(to_json(h));
    nodes.push_back({{"id", id},
                     {"kind", node_kind_name(n.kind)},
                     {"variables", vars},
                     {"fitted", n.fitted},
                     {"low_confidence", n.low_confidence},
                     {"samples", n.samples},
                     {"density", density::to_json(n.density)},
                     {"observed", observed}});
  }
  return {{"model", structure::to_json(net.model())}, {"nodes", nodes}, {"report", to_json(net.report())}};
}

ModelNetwork network_from_json(const Json& j) {
  try {
    ModelNetwork net = build(structure::static_model_from_json(j.at("model")));
    std::set<std::string> seen;
    for (const auto& jn : j.at("nodes")) {
      std::string id = jn.at("id").get<std::string>();
      auto it = net.nodes_.find(id);
      if (it == net.nodes_.end()) throw Error(ErrorCode::SchemaMismatch, "node '" + id + "' is not in the model");
      ModelNode& n = it->second;
      if (kind_from_name(jn.at("kind").get<std::string>()) != n.kind) {
        throw Error(ErrorCode::SchemaMismatch, "node '" + id + "' has the wrong kind");
      }
      n.fitted = jn.at("fitted").get<bool>();
      n.low_confidence = jn.at("low_confidence").get<bool>();
      n.samples = jn.at("samples").get<std::size_t>();
      n.density = density::density_from_json(jn.at("density"));
      for (const auto& h : jn.at("observed")) n.observed.push_back(histogram_from_json(h));
      seen.insert(id);
    }
    if (seen.size() != net.nodes_.size()) throw Error(ErrorCode::SchemaMismatch, "network is missing nodes");
    net.report_ = report_from_json(j.at("report"));
    return net;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad network: ") + e.what());
  }
}

}  // namespace psm::network
