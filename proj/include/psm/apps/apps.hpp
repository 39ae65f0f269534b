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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "psm/core/scalar.hpp"
#include "psm/density/density.hpp"
#include "psm/inference/query.hpp"
#include "psm/network/network.hpp"
#include "psm/trace/assemble.hpp"

namespace psm::apps {

// Caller variable whose value a callee variable receives, matched on the last
// name segment. Reads win over flattened parameters, which win over scalar
// parameters. Empty when nothing matches.
std::string caller_source(const network::ModelNode& caller, const structure::VariableSpec& callee_var);

// ---------------------------------------------------------------------------
// Anomaly detection and ripple analysis.

struct Observation {
  std::string node;
  std::vector<std::pair<std::string, Scalar>> values;
};

struct AnomalyConfig {
  double tau = 0.1;
  std::vector<std::string> scope;  // glob patterns over node ids scored on the ripple path; empty: all
  void validate() const;           // InvalidParams
};

struct RippleStep {
  std::string node;
  std::uint64_t frame = 0;
  int distance = 0;  // call frames below the origin frame
  std::optional<double> score;
  bool detected = false;
  std::vector<std::string> variables;
};

struct AnomalyReport {
  Observation observation;
  double tau = 0.1;
  double score = 1.0;
  bool detected = false;
  std::optional<std::uint64_t> origin_frame;
  std::string origin_executable;
  std::vector<RippleStep> ripple;
  std::optional<int> distance;  // nullopt: never detected on the ripple path
  std::vector<std::string> notes;
};

// Scores the observation against its node. With a live run, locates the first
// frame that receives the observed values and scores every frame below it.
AnomalyReport check(const network::ModelNetwork& net, const Observation& obs, const AnomalyConfig& config,
                    const trace::Assembly* live = nullptr);

Json to_json(const AnomalyReport& r);

// ---------------------------------------------------------------------------
// Stratified test generation.

enum class Stratum { Typical, Rare, Impossible };
std::string_view stratum_name(Stratum s);
Stratum stratum_from_name(std::string_view name);  // InvalidParams

struct StrataConfig {
  double typical_lo = 0.5;      // typical: [typical_lo, 1]
  double rare_lo = 0.02;        // rare: (rare_lo, rare_hi)
  double rare_hi = 0.1;
  double impossible_hi = 0.001; // impossible: below
  double iqr_inflation = 3.0;   // impossible candidates come from the IQR-inflated box
  std::size_t max_attempts = 1'000'000;
  bool with_expectations = true;

  bool contains(Stratum s, double score) const;
  void validate() const;  // InvalidParams
};

struct TestCase {
  std::vector<Scalar> args;  // aligned with TestSuite::columns
  double score = 0;
  std::optional<inference::VariableSummary> expected;  // return given the arguments
  std::string note;
};

struct TestSuite {
  std::string target;
  Stratum stratum = Stratum::Typical;
  std::vector<std::string> columns;
  std::vector<TestCase> cases;
  std::size_t attempts = 0;
  std::uint64_t seed = 0;
};

// StratumUnsatisfiable when fewer than n cases are found within the attempt cap.
TestSuite generate_tests(const network::ModelNetwork& net, const std::string& target, Stratum stratum,
                         std::size_t n, std::uint64_t seed, const StrataConfig& config = {});

Json to_json(const TestSuite& s);
// ML0 driver per case, named test_<stratum>_<i>. The drivers call the target
// on a fresh receiver; append them to the program source to run them.
std::string emit_ml0(const TestSuite& s, const structure::StaticModel& model);

// ---------------------------------------------------------------------------
// Simulation over the network.

struct SimulationConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  // Constraints on entry variables. A name that is not an entry variable
  // applies to every entry variable with that last name segment.
  std::vector<density::Constraint> overrides;
  int max_depth = 16;
  void validate() const;  // InvalidParams
};

struct NodeSimulation {
  std::string node;
  int depth = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<Scalar>> rows;
  std::vector<network::Histogram> histograms;  // per column
};

struct SimulationResult {
  std::string entry;
  std::size_t n = 0;
  std::size_t failed = 0;  // runs abandoned on a zero-probability callee condition
  bool truncated = false;  // depth cap reached
  std::uint64_t seed = 0;
  std::vector<NodeSimulation> nodes;  // entry first, then by first visit
  std::vector<std::string> warnings;

  const NodeSimulation* find(std::string_view node) const;
};

SimulationResult simulate(const network::ModelNetwork& net, const std::string& entry, const SimulationConfig& config);

Json to_json(const SimulationResult& r, bool include_rows = false);

// ---------------------------------------------------------------------------
// Model comparison.

enum class CompareMode { Integrity, Compatibility };
std::string_view compare_mode_name(CompareMode m);
CompareMode compare_mode_from_name(std::string_view name);  // InvalidParams

enum class Verdict { Compatible, Warning, Divergent };
std::string_view verdict_name(Verdict v);

struct CompareConfig {
  CompareMode mode = CompareMode::Integrity;
  double compatible_below = 0.05;
  double warning_below = 0.2;
  Verdict verdict(double divergence) const;
  void validate() const;  // InvalidParams
};

struct CompareEntry {
  std::string node;        // left node; compatibility: the caller
  std::string other_node;  // right node; compatibility: the callee
  std::vector<std::string> variables;  // compared variables, right-side names
  double divergence = 0;
  Verdict verdict = Verdict::Compatible;
  std::size_t samples = 0, other_samples = 0;
  bool low_confidence = false;
};

struct CompareReport {
  CompareMode mode = CompareMode::Integrity;
  std::vector<CompareEntry> entries;  // by divergence, largest first
  std::vector<std::string> removed, added;  // integrity: nodes only in left / only in right
  std::vector<std::pair<std::string, std::string>> skipped;  // node, reason
  Verdict overall = Verdict::Compatible;
};

// Integrity: the same node in both networks. Compatibility: what callers in
// `left` pass against what callees in `right` were fitted on. NoOverlap when
// nothing can be compared.
CompareReport compare(const network::ModelNetwork& left, const network::ModelNetwork& right,
                      const CompareConfig& config = {});

Json to_json(const CompareReport& r);

}  // namespace psm::apps
