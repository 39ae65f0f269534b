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

#include <mutex>
#include <vector>

#include "psm/density/density.hpp"

namespace psm::density {

// Per-component quantities derived from the parameters once and shared by
// evaluation and sampling.
struct ComponentPrep {
  double log_weight = 0;
  // visible continuous block
  Eigen::MatrixXd vis_chol;  // lower Cholesky factor of cov_vv
  double vis_logdet = 0;
  // hidden given visible
  Eigen::MatrixXd h_on_v;    // cov_hv cov_vv^-1
  Eigen::MatrixXd h_cond;    // cov_hh - cov_hv cov_vv^-1 cov_vh
  // visible given hidden, for sampling
  Eigen::MatrixXd v_on_h;    // cov_vh cov_hh^-1
  Eigen::MatrixXd v_cond_chol;
  Eigen::MatrixXd hid_cov;
  double log_hidden_mass = 0;
  std::vector<std::vector<double>> cat_cum;  // cumulative in-vocabulary probabilities
};

struct Density::Cache {
  std::once_flag prep_once;
  std::vector<ComponentPrep> prep;
  std::vector<double> joint_cum;
  std::once_flag ref_once;
  std::vector<double> ref_logdens;  // ascending
  std::once_flag fp_once;
  std::uint64_t fp = 0;
};

class DensityAccess {
 public:
  static Family& family(Density& d) { return d.family_; }
  static std::vector<Variable>& vars(Density& d) { return d.vars_; }
  static std::vector<Density::Binding>& bindings(Density& d) { return d.bindings_; }
  static JointTable& table(Density& d) { return d.table_; }
  static std::size_t& continuous(Density& d) { return d.continuous_; }
  static std::vector<Component>& components(Density& d) { return d.components_; }
  static std::vector<Interval>& hidden(Density& d) { return d.hidden_; }
  static std::vector<Density::PointMass>& points(Density& d) { return d.points_; }
  static void reset_cache(Density& d) { d.cache_ = std::make_shared<Density::Cache>(); }
  static const std::vector<ComponentPrep>& prep(const Density& d);
  static const std::vector<double>& joint_cum(const Density& d);
  static const std::vector<double>& reference(const Density& d);
};

namespace detail {

double point_eps(double value);

// Probability that a Gaussian with the given mean/cov lies in the box.
// Exact up to two dimensions; a product of marginals above.
double box_probability(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const std::vector<Interval>& box);

Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& idx);
Eigen::MatrixXd select(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols);

// Lower Cholesky factor; adds a small ridge if the matrix is not numerically
// positive definite.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& m);
double log_det_from_chol(const Eigen::MatrixXd& l);

bool scalar_equal(const Scalar& a, const Scalar& b);
bool scalar_less(const Scalar& a, const Scalar& b);
// Index into a sorted value list, or -1.
int find_value(const std::vector<Scalar>& values, const Scalar& v);
// Checks a value against a variable's kind; throws KindMismatch.
void check_kind(const Variable& var, const Scalar& v);
double numeric(const Scalar& v);

// Fixes up the family after variables were removed (a categorical body with
// no variables left becomes a trivial one-component mixture, no variables at
// all becomes empty) and resets the derived-quantity cache.
void normalize(Density& d);

}  // namespace detail
}  // namespace psm::density
