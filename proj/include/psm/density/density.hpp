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

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psm/core/rng.hpp"
#include "psm/core/scalar.hpp"

namespace psm::density {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A real interval with independently open or closed ends. Infinite ends are
// always open.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_closed = false;
  bool hi_closed = false;

  static Interval open(double lo, double hi) { return {lo, hi, false, false}; }
  static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
  static Interval above(double a) { return {a, kInf, false, false}; }
  static Interval at_least(double a) { return {a, kInf, true, false}; }
  static Interval below(double b) { return {-kInf, b, false, false}; }
  static Interval at_most(double b) { return {-kInf, b, false, true}; }

  bool contains(double x) const;
  bool empty() const;
  bool full() const { return lo == -kInf && hi == kInf; }
  bool operator==(const Interval&) const = default;
};

// A conditioning constraint on one variable: an exact value or an interval.
struct Constraint {
  std::string variable;
  std::optional<Scalar> point;
  Interval interval;

  static Constraint at(std::string var, Scalar value) { return {std::move(var), std::move(value), {}}; }
  static Constraint within(std::string var, Interval iv) { return {std::move(var), std::nullopt, iv}; }
};

struct FitConfig {
  int kmax = 8;
  double tolerance = 1e-6;       // relative change of the EM objective
  int max_iterations = 200;
  int restarts = 3;
  double regularization = 1e-6;  // covariance ridge, in units of the column variance
  int categorical_max_distinct = 32;
  double alpha = 1.0;            // categorical smoothing
  int min_samples = 30;
  int full_covariance_max_dim = 8;
  int bic_patience = 2;          // stop the K scan after this many non-improving K; 0 scans all

  void validate() const;  // InvalidParams
  bool operator==(const FitConfig&) const = default;
};

// Column-aligned observations. A null cell is a missing value.
struct Dataset {
  struct Column {
    std::string name;
    ScalarKind kind = ScalarKind::Float;
  };
  std::vector<Column> columns;
  std::vector<std::vector<Scalar>> rows;
};

struct Variable {
  std::string name;
  ScalarKind kind = ScalarKind::Float;
  bool categorical = false;
  bool operator==(const Variable&) const = default;
};

struct CategoricalTable {
  std::vector<Scalar> values;  // ascending
  std::vector<double> probs;
  double oov = 0.0;            // mass reserved for values not in `values`
  bool operator==(const CategoricalTable&) const = default;
};

// Joint table over several categorical variables.
struct JointTable {
  std::vector<std::vector<Scalar>> tuples;  // ascending
  std::vector<double> probs;
  double oov = 0.0;
  bool operator==(const JointTable&) const = default;
};

// One Gaussian component over the continuous dimensions, followed by any
// hidden (interval-conditioned) dimensions, times independent per-component
// categorical factors. `hidden_mass` is the component's probability of the
// hidden box and normalizes the truncation.
struct Component {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<CategoricalTable> cats;
  double hidden_mass = 1.0;
  bool operator==(const Component& o) const {
    return weight == o.weight && mean == o.mean && cov == o.cov && cats == o.cats && hidden_mass == o.hidden_mass;
  }
};

struct ColumnStats {
  std::size_t count = 0;
  double min = 0, max = 0, q1 = 0, q3 = 0, mean = 0, sd = 0;
  bool operator==(const ColumnStats&) const = default;
};

struct FitInfo {
  std::size_t samples = 0;
  int k = 0;
  bool converged = true;
  bool low_confidence = false;
  std::size_t em_steps = 0;
  std::vector<double> bic;               // index K-1; NaN when not evaluated
  std::vector<double> objective_trace;   // EM objective per iteration of the selected run
  std::vector<std::string> warnings;
  std::map<std::string, ColumnStats> stats;  // observed numeric columns
  bool operator==(const FitInfo&) const;
};

enum class Family { Empty, Categorical, Mixture };

class Density {
 public:
  enum class Slot { Continuous, Categorical, Point };
  struct Binding {
    Slot slot = Slot::Continuous;
    int index = 0;
    bool operator==(const Binding&) const = default;
  };
  struct PointMass {
    double value = 0;
    double eps = 0;
    bool operator==(const PointMass&) const = default;
  };

  Density();  // empty density

  // Builders for analytically specified densities.
  static Density categorical(Variable var, CategoricalTable table);
  static Density joint(std::vector<Variable> vars, JointTable table);
  // `vars` are all continuous; each component's mean/cov span them in order.
  static Density mixture(std::vector<Variable> vars, std::vector<Component> components);
  static Density point(Variable var, double value, double eps);
  static Density point(Variable var, double value);  // eps from value

  Family family() const { return family_; }
  bool empty() const { return vars_.empty(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Binding>& bindings() const { return bindings_; }
  int index_of(const std::string& name) const;  // -1 when absent
  const Variable& variable(const std::string& name) const;  // UnknownVariable

  const JointTable& table() const { return table_; }
  const std::vector<Component>& components() const { return components_; }
  const std::vector<Interval>& hidden() const { return hidden_; }
  const std::vector<PointMass>& points() const { return points_; }
  std::size_t continuous_dims() const { return continuous_; }

  const FitInfo& info() const { return info_; }
  FitInfo& mutable_info() { return info_; }

  // Hash of the serialized parameters.
  std::uint64_t fingerprint() const;

  bool operator==(const Density& o) const;

 private:
  friend class DensityAccess;
  struct Cache;

  Family family_ = Family::Empty;
  std::vector<Variable> vars_;
  std::vector<Binding> bindings_;
  JointTable table_;
  std::size_t continuous_ = 0;
  std::vector<Component> components_;
  std::vector<Interval> hidden_;
  std::vector<PointMass> points_;
  FitInfo info_;
  std::shared_ptr<Cache> cache_;
};

Density fit(const Dataset& data, const FitConfig& config, std::uint64_t seed);

// `point` lists one value per variable, in variable order.
double log_density(const Density& d, const std::vector<Scalar>& point);
std::vector<std::vector<Scalar>> sample(const Density& d, Rng& rng, std::size_t n);
Density condition(const Density& d, const std::vector<Constraint>& constraints);
Density marginal(const Density& d, const std::vector<std::string>& names);
double interval_probability(const Density& d, const std::string& variable, const Interval& interval);
double quantile_score(const Density& d, const std::vector<Scalar>& point);
double divergence(const Density& a, const Density& b);  // Jensen-Shannon, bits
std::vector<Scalar> mode(const Density& d);

// Same density with variables renamed; names not in the map are kept.
Density rename(const Density& d, const std::map<std::string, std::string>& names);

// Cumulative distribution of one continuous or numeric categorical variable.
double cdf(const Density& d, const std::string& variable, double x);
// Mean of one numeric variable.
double mean(const Density& d, const std::string& variable);

// Reference-draw count and seed behind quantile_score.
inline constexpr std::size_t kReferenceDraws = 4096;
inline constexpr std::size_t kDivergenceDraws = 8192;

Json to_json(const Density& d);
Density density_from_json(const Json& j);

}  // namespace psm::density
