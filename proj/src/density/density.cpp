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

#include "psm/density/density.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "internal.hpp"
#include "psm/core/error.hpp"
#include "psm/core/hash.hpp"
#include "special.hpp"

namespace psm::density {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using A = DensityAccess;

bool Interval::contains(double x) const {
  if (x < lo || x > hi) return false;
  if (x == lo && !lo_closed) return false;
  if (x == hi && !hi_closed) return false;
  return true;
}

bool Interval::empty() const {
  if (std::isnan(lo) || std::isnan(hi)) return true;
  if (lo < hi) return false;
  return !(lo == hi && lo_closed && hi_closed && std::isfinite(lo));
}

void FitConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, "fit config: " + what); };
  if (kmax < 1) bad("kmax must be >= 1");
  if (!(tolerance > 0)) bad("tolerance must be positive");
  if (max_iterations < 1) bad("max_iterations must be >= 1");
  if (restarts < 1) bad("restarts must be >= 1");
  if (!(regularization > 0)) bad("regularization must be positive");
  if (categorical_max_distinct < 1) bad("categorical_max_distinct must be >= 1");
  if (!(alpha > 0)) bad("alpha must be positive");
  if (min_samples < 1) bad("min_samples must be >= 1");
  if (full_covariance_max_dim < 1) bad("full_covariance_max_dim must be >= 1");
  if (bic_patience < 0) bad("bic_patience must be >= 0");
}

bool FitInfo::operator==(const FitInfo& o) const {
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i])))) return false;
    }
    return true;
  };
  return samples == o.samples && k == o.k && converged == o.converged && low_confidence == o.low_confidence &&
         em_steps == o.em_steps && same(bic, o.bic) && same(objective_trace, o.objective_trace) &&
         warnings == o.warnings && stats == o.stats;
}

Density::Density() : cache_(std::make_shared<Cache>()) {}

Density Density::categorical(Variable var, CategoricalTable table) {
  var.categorical = true;
  JointTable jt;
  for (auto& v : table.values) jt.tuples.push_back({v});
  jt.probs = std::move(table.probs);
  jt.oov = table.oov;
  return joint({std::move(var)}, std::move(jt));
}

Density Density::joint(std::vector<Variable> vars, JointTable table) {
  Density d;
  d.family_ = Family::Categorical;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    vars[i].categorical = true;
    d.bindings_.push_back({Slot::Categorical, static_cast<int>(i)});
  }
  for (const auto& t : table.tuples) {
    if (t.size() != vars.size()) throw Error(ErrorCode::InvalidParams, "joint table tuple width does not match variables");
  }
  if (table.tuples.size() != table.probs.size()) throw Error(ErrorCode::InvalidParams, "joint table size mismatch");
  d.vars_ = std::move(vars);
  d.table_ = std::move(table);
  detail::normalize(d);
  return d;
}

Density Density::mixture(std::vector<Variable> vars, std::vector<Component> components) {
  Density d;
  d.family_ = Family::Mixture;
  const auto n = static_cast<Eigen::Index>(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    vars[i].categorical = false;
    d.bindings_.push_back({Slot::Continuous, static_cast<int>(i)});
  }
  double total = 0;
  for (const auto& c : components) {
    if (c.mean.size() != n || c.cov.rows() != n || c.cov.cols() != n || !c.cats.empty()) {
      throw Error(ErrorCode::InvalidParams, "mixture component does not match variables");
    }
    total += c.weight;
  }
  if (components.empty() || !(total > 0)) throw Error(ErrorCode::InvalidParams, "mixture needs positive weights");
  for (auto& c : components) c.weight /= total;
  d.vars_ = std::move(vars);
  d.continuous_ = static_cast<std::size_t>(n);
  d.components_ = std::move(components);
  detail::normalize(d);
  return d;
}

Density Density::point(Variable var, double value, double eps) {
  Density d;
  d.family_ = Family::Mixture;
  var.categorical = false;
  d.vars_ = {std::move(var)};
  d.bindings_ = {{Slot::Point, 0}};
  d.points_ = {{value, eps}};
  Component c;
  c.mean = VectorXd(0);
  c.cov = MatrixXd(0, 0);
  d.components_ = {c};
  detail::normalize(d);
  return d;
}

Density Density::point(Variable var, double value) { return point(std::move(var), value, detail::point_eps(value)); }

int Density::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const Variable& Density::variable(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw Error(ErrorCode::UnknownVariable, "unknown variable '" + name + "'");
  return vars_[static_cast<std::size_t>(i)];
}

std::uint64_t Density::fingerprint() const {
  std::call_once(cache_->fp_once, [&] {
    Json j = to_json(*this);
    j.erase("info");
    cache_->fp = fnv1a64(j.dump());
  });
  return cache_->fp;
}

bool Density::operator==(const Density& o) const {
  return family_ == o.family_ && vars_ == o.vars_ && bindings_ == o.bindings_ && table_ == o.table_ &&
         continuous_ == o.continuous_ && components_ == o.components_ && hidden_ == o.hidden_ &&
         points_ == o.points_ && info_ == o.info_;
}

namespace detail {

double point_eps(double value) { return 1e-9 * std::max(1.0, std::abs(value)); }

VectorXd select(const VectorXd& v, const std::vector<int>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

MatrixXd select(const MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    }
  }
  return out;
}

MatrixXd cholesky(const MatrixXd& m) {
  if (m.rows() == 0) return MatrixXd(0, 0);
  MatrixXd a = 0.5 * (m + m.transpose());
  double ridge = 0;
  double scale = std::max(1e-300, a.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<MatrixXd> llt(a + ridge * MatrixXd::Identity(a.rows(), a.cols()));
    if (llt.info() == Eigen::Success) {
      MatrixXd l = llt.matrixL();
      if ((l.diagonal().array() > 0).all()) return l;
    }
    ridge = ridge == 0 ? scale * 1e-14 : ridge * 10;
  }
  throw Error(ErrorCode::Internal, "covariance is not positive definite");
}

double log_det_from_chol(const MatrixXd& l) {
  double s = 0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2 * s;
}

double box_probability(const VectorXd& mean, const MatrixXd& cov, const std::vector<Interval>& box) {
  const std::size_t n = box.size();
  if (n == 0) return 1.0;
  auto bounds = [&](std::size_t i, double& a, double& b) {
    double s = std::sqrt(std::max(cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), 1e-300));
    double m = mean(static_cast<Eigen::Index>(i));
    a = (box[i].lo - m) / s;
    b = (box[i].hi - m) / s;
  };
  if (n == 2) {
    double a1, b1, a2, b2;
    bounds(0, a1, b1);
    bounds(1, a2, b2);
    double denom = std::sqrt(std::max(cov(0, 0), 1e-300) * std::max(cov(1, 1), 1e-300));
    double r = std::clamp(cov(0, 1) / denom, -1.0, 1.0);
    return bvn_mass(a1, b1, a2, b2, r);
  }
  double p = 1;
  for (std::size_t i = 0; i < n; ++i) {
    double a, b;
    bounds(i, a, b);
    p *= norm_mass(a, b);
  }
  return p;
}

double numeric(const Scalar& v) {
  if (std::holds_alternative<std::int64_t>(v)) return static_cast<double>(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? 1.0 : 0.0;
  throw Error(ErrorCode::KindMismatch, "expected a numeric value, got " + to_display(v));
}

bool scalar_equal(const Scalar& a, const Scalar& b) {
  bool an = std::holds_alternative<std::int64_t>(a) || std::holds_alternative<double>(a);
  bool bn = std::holds_alternative<std::int64_t>(b) || std::holds_alternative<double>(b);
  if (an && bn) return numeric(a) == numeric(b);
  return a == b;
}

bool scalar_less(const Scalar& a, const Scalar& b) {
  bool an = std::holds_alternative<std::int64_t>(a) || std::holds_alternative<double>(a);
  bool bn = std::holds_alternative<std::int64_t>(b) || std::holds_alternative<double>(b);
  if (an && bn) return numeric(a) < numeric(b);
  if (an != bn) return an;
  return a < b;
}

int find_value(const std::vector<Scalar>& values, const Scalar& v) {
  auto it = std::lower_bound(values.begin(), values.end(), v, scalar_less);
  if (it != values.end() && scalar_equal(*it, v)) return static_cast<int>(it - values.begin());
  return -1;
}

void check_kind(const Variable& var, const Scalar& v) {
  auto fail = [&] {
    throw Error(ErrorCode::KindMismatch, "value " + (is_null(v) ? std::string("null") : to_display(v)) +
                                             " does not fit variable '" + var.name + "' of kind " +
                                             std::string(scalar_kind_name(var.kind)));
  };
  bool num = std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
  switch (var.kind) {
    case ScalarKind::Int:
    case ScalarKind::Float:
      if (!num) fail();
      if (std::holds_alternative<double>(v) && !std::isfinite(std::get<double>(v))) fail();
      break;
    case ScalarKind::Bool:
      if (!std::holds_alternative<bool>(v)) fail();
      break;
    case ScalarKind::String:
      if (!std::holds_alternative<std::string>(v)) fail();
      break;
  }
}

void normalize(Density& d) {
  auto& vars = A::vars(d);
  if (vars.empty()) {
    A::family(d) = Family::Empty;
    A::bindings(d).clear();
    A::table(d) = {};
    A::continuous(d) = 0;
    A::components(d).clear();
    A::hidden(d).clear();
    A::points(d).clear();
  } else if (A::family(d) == Family::Categorical) {
    bool any = false;
    for (const auto& b : A::bindings(d)) any |= b.slot == Density::Slot::Categorical;
    if (!any) {
      A::family(d) = Family::Mixture;
      A::table(d) = {};
      Component c;
      c.mean = VectorXd(0);
      c.cov = MatrixXd(0, 0);
      A::components(d) = {c};
    }
  }
  A::reset_cache(d);
}

}  // namespace detail

const std::vector<ComponentPrep>& DensityAccess::prep(const Density& d) {
  std::call_once(d.cache_->prep_once, [&] {
    const auto nv = static_cast<Eigen::Index>(d.continuous_);
    const auto nh = static_cast<Eigen::Index>(d.hidden_.size());
    for (const auto& c : d.components_) {
      ComponentPrep p;
      p.log_weight = std::log(c.weight);
      p.log_hidden_mass = std::log(c.hidden_mass);
      MatrixXd svv = c.cov.topLeftCorner(nv, nv);
      MatrixXd shh = c.cov.bottomRightCorner(nh, nh);
      MatrixXd svh = c.cov.topRightCorner(nv, nh);
      p.vis_chol = detail::cholesky(svv);
      p.vis_logdet = detail::log_det_from_chol(p.vis_chol);
      p.hid_cov = shh;
      if (nh > 0) {
        if (nv > 0) {
          MatrixXd x = p.vis_chol.triangularView<Eigen::Lower>().solve(svh);
          x = p.vis_chol.transpose().triangularView<Eigen::Upper>().solve(x);  // svv^-1 svh
          p.h_on_v = x.transpose();
          p.h_cond = shh - p.h_on_v * svh;
        } else {
          p.h_on_v = MatrixXd(nh, 0);
          p.h_cond = shh;
        }
        MatrixXd lh = detail::cholesky(shh);
        MatrixXd y = lh.triangularView<Eigen::Lower>().solve(svh.transpose());
        y = lh.transpose().triangularView<Eigen::Upper>().solve(y);  // shh^-1 shv
        p.v_on_h = y.transpose();
        p.v_cond_chol = detail::cholesky(svv - p.v_on_h * svh.transpose());
      } else {
        p.v_on_h = MatrixXd(nv, 0);
        p.v_cond_chol = p.vis_chol;
      }
      for (const auto& t : c.cats) {
        std::vector<double> cum;
        double s = 0, total = 0;
        for (double q : t.probs) total += q;
        for (double q : t.probs) cum.push_back(s += q / total);
        p.cat_cum.push_back(std::move(cum));
      }
      d.cache_->prep.push_back(std::move(p));
    }
  });
  return d.cache_->prep;
}

const std::vector<double>& DensityAccess::joint_cum(const Density& d) {
  std::call_once(d.cache_->prep_once, [&] {
    double s = 0, total = 0;
    for (double q : d.table_.probs) total += q;
    for (double q : d.table_.probs) d.cache_->joint_cum.push_back(s += q / total);
  });
  return d.cache_->joint_cum;
}

namespace {

void check_point(const Density& d, const std::vector<Scalar>& point) {
  if (point.size() != d.variables().size()) {
    throw Error(ErrorCode::KindMismatch, "point has " + std::to_string(point.size()) + " values, density has " +
                                             std::to_string(d.variables().size()) + " variables");
  }
  for (std::size_t i = 0; i < point.size(); ++i) detail::check_kind(d.variables()[i], point[i]);
}

double log_or_ninf(double p) { return p > 0 ? std::log(p) : -kInf; }

double cat_log_prob(const CategoricalTable& t, const Scalar& v) {
  int i = detail::find_value(t.values, v);
  return log_or_ninf(i >= 0 ? t.probs[static_cast<std::size_t>(i)] : t.oov);
}

bool tuple_less(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), detail::scalar_less);
}

}  // namespace

double log_density(const Density& d, const std::vector<Scalar>& point) {
  if (d.empty()) throw Error(ErrorCode::EmptyDensity, "log density of an empty density is undefined");
  check_point(d, point);
  const auto& vars = d.variables();
  double lp = 0;
  std::vector<Scalar> catv;
  VectorXd x(static_cast<Eigen::Index>(d.continuous_dims()));
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& b = d.bindings()[i];
    switch (b.slot) {
      case Density::Slot::Point: {
        const auto& pm = d.points()[static_cast<std::size_t>(b.index)];
        double z = (detail::numeric(point[i]) - pm.value) / pm.eps;
        lp += detail::norm_logpdf(z) - std::log(pm.eps);
        break;
      }
      case Density::Slot::Continuous:
        x(b.index) = detail::numeric(point[i]);
        break;
      case Density::Slot::Categorical:
        if (catv.size() <= static_cast<std::size_t>(b.index)) catv.resize(static_cast<std::size_t>(b.index) + 1);
        catv[static_cast<std::size_t>(b.index)] = point[i];
        break;
    }
  }
  if (d.family() == Family::Categorical) {
    const auto& t = d.table();
    auto it = std::lower_bound(t.tuples.begin(), t.tuples.end(), catv, tuple_less);
    bool hit = it != t.tuples.end() && !tuple_less(catv, *it);
    return lp + log_or_ninf(hit ? t.probs[static_cast<std::size_t>(it - t.tuples.begin())] : t.oov);
  }
  const auto& prep = DensityAccess::prep(d);
  const auto nv = x.size();
  const auto nh = static_cast<Eigen::Index>(d.hidden().size());
  std::vector<double> terms(d.components().size());
  for (std::size_t k = 0; k < d.components().size(); ++k) {
    const auto& c = d.components()[k];
    const auto& p = prep[k];
    double t = p.log_weight;
    VectorXd diff = x - c.mean.head(nv);
    if (nv > 0) {
      VectorXd y = p.vis_chol.triangularView<Eigen::Lower>().solve(diff);
      t += -0.5 * (static_cast<double>(nv) * detail::kLog2Pi + p.vis_logdet + y.squaredNorm());
    }
    for (std::size_t j = 0; j < c.cats.size(); ++j) t += cat_log_prob(c.cats[j], catv[j]);
    if (nh > 0) {
      VectorXd mh = c.mean.tail(nh) + p.h_on_v * diff;
      t += log_or_ninf(detail::box_probability(mh, p.h_cond, d.hidden())) - p.log_hidden_mass;
    }
    terms[k] = t;
  }
  return lp + detail::log_sum_exp(terms.data(), static_cast<int>(terms.size()));
}

Density marginal(const Density& d, const std::vector<std::string>& names) {
  std::vector<int> idx;
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw Error(ErrorCode::InvalidParams, "variable '" + n + "' listed twice");
    d.variable(n);
    idx.push_back(d.index_of(n));
  }
  Density out;
  A::family(out) = d.family();
  out.mutable_info() = d.info();
  auto& stats = out.mutable_info().stats;
  for (auto it = stats.begin(); it != stats.end();) it = seen.count(it->first) ? std::next(it) : stats.erase(it);

  std::vector<int> cont, cats, pts;
  for (int i : idx) {
    const auto& b = d.bindings()[static_cast<std::size_t>(i)];
    A::vars(out).push_back(d.variables()[static_cast<std::size_t>(i)]);
    std::vector<int>* list = b.slot == Density::Slot::Continuous ? &cont
                             : b.slot == Density::Slot::Categorical ? &cats
                                                                     : &pts;
    A::bindings(out).push_back({b.slot, static_cast<int>(list->size())});
    list->push_back(b.index);
  }
  for (int p : pts) A::points(out).push_back(d.points()[static_cast<std::size_t>(p)]);
  if (d.family() == Family::Categorical) {
    std::vector<std::pair<std::vector<Scalar>, double>> proj;
    for (std::size_t r = 0; r < d.table().tuples.size(); ++r) {
      std::vector<Scalar> t;
      for (int c : cats) t.push_back(d.table().tuples[r][static_cast<std::size_t>(c)]);
      proj.emplace_back(std::move(t), d.table().probs[r]);
    }
    std::stable_sort(proj.begin(), proj.end(), [](const auto& a, const auto& b) { return tuple_less(a.first, b.first); });
    JointTable jt;
    jt.oov = d.table().oov;
    for (auto& [t, p] : proj) {
      if (!jt.tuples.empty() && !tuple_less(jt.tuples.back(), t)) {
        jt.probs.back() += p;
      } else {
        jt.tuples.push_back(std::move(t));
        jt.probs.push_back(p);
      }
    }
    A::table(out) = std::move(jt);
  } else if (d.family() == Family::Mixture) {
    std::vector<int> gdims = cont;
    for (std::size_t h = 0; h < d.hidden().size(); ++h) gdims.push_back(static_cast<int>(d.continuous_dims() + h));
    for (const auto& c : d.components()) {
      Component nc;
      nc.weight = c.weight;
      nc.hidden_mass = c.hidden_mass;
      nc.mean = detail::select(c.mean, gdims);
      nc.cov = detail::select(c.cov, gdims, gdims);
      for (int j : cats) nc.cats.push_back(c.cats[static_cast<std::size_t>(j)]);
      A::components(out).push_back(std::move(nc));
    }
    A::continuous(out) = cont.size();
    A::hidden(out) = d.hidden();
  }
  detail::normalize(out);
  return out;
}

Density condition(const Density& d, const std::vector<Constraint>& constraints) {
  if (constraints.empty()) return d;
  const auto& vars = d.variables();
  std::vector<const Constraint*> by_var(vars.size(), nullptr);
  for (const auto& c : constraints) {
    d.variable(c.variable);
    auto i = static_cast<std::size_t>(d.index_of(c.variable));
    if (by_var[i]) throw Error(ErrorCode::InvalidParams, "variable '" + c.variable + "' constrained twice");
    if (c.point) {
      detail::check_kind(vars[i], *c.point);
    } else {
      if (c.interval.empty()) throw Error(ErrorCode::InvalidParams, "empty interval on '" + c.variable + "'");
      if (vars[i].kind == ScalarKind::String || vars[i].kind == ScalarKind::Bool) {
        throw Error(ErrorCode::KindMismatch, "interval constraint on unordered variable '" + c.variable + "'");
      }
    }
    by_var[i] = &c;
  }

  Density out;
  A::family(out) = d.family();
  out.mutable_info() = d.info();
  out.mutable_info().warnings.clear();
  double log_evidence = 0;  // standardized

  // constraint lists per slot, in variable order
  std::vector<std::pair<int, const Constraint*>> cat_cons;
  std::vector<int> keep_cont, keep_cats;
  std::vector<std::pair<int, double>> point_cons;          // gaussian dim, value
  std::vector<std::pair<int, Interval>> interval_cons;     // gaussian dim, interval
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& b = d.bindings()[i];
    const Constraint* c = by_var[i];
    if (!c) {
      A::vars(out).push_back(vars[i]);
      std::size_t next = 0;
      if (b.slot == Density::Slot::Continuous) {
        next = keep_cont.size();
        keep_cont.push_back(b.index);
      } else if (b.slot == Density::Slot::Categorical) {
        next = keep_cats.size();
        keep_cats.push_back(b.index);
      } else {
        next = A::points(out).size();
        A::points(out).push_back(d.points()[static_cast<std::size_t>(b.index)]);
      }
      A::bindings(out).push_back({b.slot, static_cast<int>(next)});
      if (auto it = d.info().stats.find(vars[i].name); it != d.info().stats.end()) {
        out.mutable_info().stats[it->first] = it->second;
      }
      continue;
    }
    out.mutable_info().stats.erase(vars[i].name);
    switch (b.slot) {
      case Density::Slot::Point: {
        const auto& pm = d.points()[static_cast<std::size_t>(b.index)];
        if (c->point) {
          double z = (detail::numeric(*c->point) - pm.value) / pm.eps;
          log_evidence += -0.5 * z * z;
        } else {
          log_evidence += log_or_ninf(detail::norm_mass((c->interval.lo - pm.value) / pm.eps,
                                                       (c->interval.hi - pm.value) / pm.eps));
        }
        break;
      }
      case Density::Slot::Categorical:
        cat_cons.emplace_back(b.index, c);
        break;
      case Density::Slot::Continuous:
        if (c->point) {
          point_cons.emplace_back(b.index, detail::numeric(*c->point));
        } else {
          interval_cons.emplace_back(b.index, c->interval);
        }
        break;
    }
  }

  auto cat_match = [](const Constraint& c, const Scalar& v) {
    if (c.point) return detail::scalar_equal(*c.point, v);
    return c.interval.contains(detail::numeric(v));
  };
  auto zero = [&] {
    throw Error(ErrorCode::ZeroProbabilityCondition, "conditioning region has probability below 1e-12");
  };

  if (d.family() == Family::Categorical) {
    std::vector<std::pair<std::vector<Scalar>, double>> kept;
    double s = 0;
    for (std::size_t r = 0; r < d.table().tuples.size(); ++r) {
      const auto& t = d.table().tuples[r];
      bool ok = true;
      for (const auto& [j, c] : cat_cons) ok = ok && cat_match(*c, t[static_cast<std::size_t>(j)]);
      if (!ok) continue;
      s += d.table().probs[r];
      std::vector<Scalar> nt;
      for (int j : keep_cats) nt.push_back(t[static_cast<std::size_t>(j)]);
      kept.emplace_back(std::move(nt), d.table().probs[r]);
    }
    double in_vocab = 1.0 - d.table().oov;
    if (!cat_cons.empty()) log_evidence += log_or_ninf(s / in_vocab);
    if (!(log_evidence >= std::log(1e-12))) zero();
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return tuple_less(a.first, b.first); });
    JointTable jt;
    jt.oov = d.table().oov;
    for (auto& [t, p] : kept) {
      double q = p / s * in_vocab;
      if (!jt.tuples.empty() && !tuple_less(jt.tuples.back(), t)) {
        jt.probs.back() += q;
      } else {
        jt.tuples.push_back(std::move(t));
        jt.probs.push_back(q);
      }
    }
    A::table(out) = std::move(jt);
    detail::normalize(out);
    return out;
  }

  // mixture body
  const int nv = static_cast<int>(d.continuous_dims());
  const int nh = static_cast<int>(d.hidden().size());
  std::vector<int> given, rest;
  VectorXd xg(static_cast<Eigen::Index>(point_cons.size()));
  for (std::size_t i = 0; i < point_cons.size(); ++i) {
    given.push_back(point_cons[i].first);
    xg(static_cast<Eigen::Index>(i)) = point_cons[i].second;
  }
  // remaining dims: kept visible, old hidden, newly hidden
  rest = keep_cont;
  for (int h = 0; h < nh; ++h) rest.push_back(nv + h);
  std::vector<Interval> new_hidden = d.hidden();
  for (const auto& [dim, iv] : interval_cons) {
    rest.push_back(dim);
    new_hidden.push_back(iv);
  }
  const auto n_keep = static_cast<Eigen::Index>(keep_cont.size());
  const auto n_hid = static_cast<Eigen::Index>(new_hidden.size());

  std::vector<Component> comps;
  std::vector<double> log_w, log_std;
  for (const auto& c : d.components()) {
    double lf = std::log(c.weight);
    for (const auto& [j, con] : cat_cons) {
      const auto& t = c.cats[static_cast<std::size_t>(j)];
      if (con->point) {
        lf += cat_log_prob(t, *con->point);
      } else {
        double s = 0;
        for (std::size_t v = 0; v < t.values.size(); ++v) {
          if (con->interval.contains(detail::numeric(t.values[v]))) s += t.probs[v];
        }
        lf += log_or_ninf(s / (1.0 - t.oov));
      }
    }
    Component nc;
    double ln = 0, lstd = 0;
    if (!given.empty()) {
      MatrixXd sgg = detail::select(c.cov, given, given);
      MatrixXd srg = detail::select(c.cov, rest, given);
      MatrixXd l = detail::cholesky(sgg);
      VectorXd diff = xg - detail::select(c.mean, given);
      VectorXd y = l.triangularView<Eigen::Lower>().solve(diff);
      double maha = y.squaredNorm();
      ln = -0.5 * (static_cast<double>(given.size()) * detail::kLog2Pi + detail::log_det_from_chol(l) + maha);
      lstd = -0.5 * maha;
      MatrixXd gain = l.transpose().triangularView<Eigen::Upper>().solve(
          l.triangularView<Eigen::Lower>().solve(srg.transpose()));  // sgg^-1 sgr
      nc.mean = detail::select(c.mean, rest) + gain.transpose() * diff;
      nc.cov = detail::select(c.cov, rest, rest) - srg * gain;
      nc.cov = 0.5 * (nc.cov + nc.cov.transpose());
    } else {
      nc.mean = detail::select(c.mean, rest);
      nc.cov = detail::select(c.cov, rest, rest);
    }
    double z_new = detail::box_probability(nc.mean.tail(n_hid), nc.cov.bottomRightCorner(n_hid, n_hid), new_hidden);
    double lz = log_or_ninf(z_new) - std::log(c.hidden_mass);
    nc.hidden_mass = z_new;
    for (int j : keep_cats) nc.cats.push_back(c.cats[static_cast<std::size_t>(j)]);
    log_w.push_back(lf + ln + lz);
    log_std.push_back(lf + lstd + lz);
    comps.push_back(std::move(nc));
  }
  log_evidence += detail::log_sum_exp(log_std.data(), static_cast<int>(log_std.size()));
  if (!(log_evidence >= std::log(1e-12))) zero();
  double norm = detail::log_sum_exp(log_w.data(), static_cast<int>(log_w.size()));
  if (!std::isfinite(norm)) zero();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    double w = std::exp(log_w[k] - norm);
    if (w > 0 && comps[k].hidden_mass > 0) {
      comps[k].weight = w;
      A::components(out).push_back(std::move(comps[k]));
    }
  }
  if (A::components(out).empty()) zero();
  double total = 0;
  for (const auto& c : A::components(out)) total += c.weight;
  for (auto& c : A::components(out)) c.weight /= total;
  A::continuous(out) = static_cast<std::size_t>(n_keep);
  A::hidden(out) = std::move(new_hidden);
  detail::normalize(out);
  return out;
}

}  // namespace psm::density

namespace psm::density {

Density rename(const Density& d, const std::map<std::string, std::string>& names) {
  Density out = d;
  std::set<std::string> seen;
  for (auto& v : DensityAccess::vars(out)) {
    if (auto it = names.find(v.name); it != names.end()) v.name = it->second;
    if (!seen.insert(v.name).second) throw Error(ErrorCode::InvalidParams, "rename produces duplicate '" + v.name + "'");
  }
  std::map<std::string, ColumnStats> stats;
  for (const auto& [name, s] : out.info().stats) {
    auto it = names.find(name);
    stats[it == names.end() ? name : it->second] = s;
  }
  out.mutable_info().stats = std::move(stats);
  DensityAccess::reset_cache(out);
  return out;
}

}  // namespace psm::density
