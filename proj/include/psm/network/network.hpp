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

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "psm/core/scalar.hpp"
#include "psm/density/density.hpp"
#include "psm/structure/static_model.hpp"
#include "psm/structure/variables.hpp"
#include "psm/trace/assemble.hpp"

namespace psm::network {

inline constexpr int kHistogramBins = 256;

// Fixed-width histogram over [lo, hi] for ordered variables, or value counts
// for categorical ones. `mass` sums to 1 when anything was counted.
struct Histogram {
  std::string variable;
  bool categorical = false;
  double lo = 0, hi = 0;
  std::vector<Scalar> values;  // categorical only
  std::vector<double> mass;
  std::size_t count = 0;

  double width() const { return mass.empty() ? 0.0 : (hi - lo) / static_cast<double>(mass.size()); }
  double center(std::size_t bin) const { return lo + (static_cast<double>(bin) + 0.5) * width(); }
  bool operator==(const Histogram&) const = default;
};

// Bins numeric values over [lo, hi]; values outside are clamped to the edge bins.
Histogram numeric_histogram(std::string variable, const std::vector<double>& xs, double lo, double hi,
                            int bins = kHistogramBins);
// Range = observed [min, max], widened when degenerate.
Histogram numeric_histogram(std::string variable, const std::vector<double>& xs, int bins = kHistogramBins);
Histogram categorical_histogram(std::string variable, const std::vector<Scalar>& xs);

enum class NodeKind { Property, Type, Executable };
std::string_view node_kind_name(NodeKind kind);

struct ModelNode {
  std::string id;
  NodeKind kind = NodeKind::Type;
  std::vector<structure::VariableSpec> variables;
  density::Density density;
  bool fitted = false;
  bool low_confidence = false;
  std::size_t samples = 0;
  std::vector<Histogram> observed;  // one per variable, from the fitting rows

  const structure::VariableSpec* find_variable(std::string_view name) const;
};

struct FitReportEntry {
  std::string node;
  NodeKind kind = NodeKind::Type;
  std::size_t samples = 0;
  std::size_t dropped_aborted = 0;
  bool fitted = false;
  bool low_confidence = false;
  bool converged = false;
  int k = 0;
  std::vector<double> bic;
  std::vector<std::string> warnings;
};

struct FitReport {
  std::vector<FitReportEntry> entries;  // sorted by node id
  std::uint64_t seed = 0;
  density::FitConfig config;
};

class ModelNetwork {
 public:
  const structure::StaticModel& model() const { return model_; }
  const std::map<std::string, ModelNode>& nodes() const { return nodes_; }
  const std::vector<structure::Edge>& edges() const { return model_.edges; }
  const FitReport& report() const { return report_; }

  const ModelNode* find(std::string_view id) const;
  const ModelNode& node(std::string_view id) const;         // UnknownNode
  const ModelNode& fitted_node(std::string_view id, bool allow_low_confidence = true) const;  // + UnfittedNode

  bool empty() const { return nodes_.empty(); }

 private:
  friend ModelNetwork build(const structure::StaticModel& model);
  friend FitReport fit_all(ModelNetwork& net, const trace::RowsByNode& rows, const density::FitConfig& config,
                           std::uint64_t seed);
  friend ModelNetwork network_from_json(const Json& j);

  structure::StaticModel model_;
  std::map<std::string, ModelNode> nodes_;
  FitReport report_;
};

// One node per in-universe property, type and executable. External types and
// drivers get no node.
ModelNetwork build(const structure::StaticModel& model);

// Node dataset from assembled rows. SchemaMismatch for cells naming unknown
// variables.
density::Dataset dataset_for(const ModelNode& node, const trace::NodeRows& rows);

// Fits every node. Each node's seed is derived from the master seed and the
// node id, so results do not depend on iteration order.
FitReport fit_all(ModelNetwork& net, const trace::RowsByNode& rows, const density::FitConfig& config,
                  std::uint64_t seed);

struct DownstreamEntry {
  std::string id;
  int depth = 0;  // call frames below the origin
  bool cyclic = false;
  bool operator==(const DownstreamEntry&) const = default;
};

// Executables reachable through call sites, ordered by call depth then site.
// A callee already on the call path is reported once with the cyclic mark and
// not expanded further.
std::vector<DownstreamEntry> downstream(const ModelNetwork& net, std::string_view id);

Json config_to_json(const density::FitConfig& c);
density::FitConfig config_from_json(const Json& j);

Json to_json(const Histogram& h);
Histogram histogram_from_json(const Json& j);
Json to_json(const FitReport& report);
Json to_json(const ModelNetwork& net);
ModelNetwork network_from_json(const Json& j);

}  // namespace psm::network
