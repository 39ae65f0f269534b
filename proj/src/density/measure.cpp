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
#include <cmath>
#include <numeric>

#include "internal.hpp"
#include "psm/core/error.hpp"
#include "special.hpp"

namespace psm::density {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::uint64_t kReferenceSeed = 0x5153434f52450001ULL;
constexpr std::uint64_t kDivergenceSeedP = 0x4a53444956000001ULL;
constexpr std::uint64_t kDivergenceSeedQ = 0x4a53444956000002ULL;

void require_ordered(const Variable& v) {
  if (v.kind == ScalarKind::String || v.kind == ScalarKind::Bool) {
    throw Error(ErrorCode::KindMismatch, "variable '" + v.name + "' is not ordered");
  }
}

// Categorical marginal of one variable as (value, prob) plus in-vocabulary mass.
CategoricalTable categorical_marginal(const Density& m) {
  CategoricalTable out;
  if (m.family() == Family::Categorical) {
    for (std::size_t r = 0; r < m.table().tuples.size(); ++r) {
      out.values.push_back(m.table().tuples[r][0]);
      out.probs.push_back(m.table().probs[r]);
    }
    out.oov = m.table().oov;
    return out;
  }
  const auto& comps = m.components();
  out.values = comps[0].cats[0].values;
  out.probs.assign(out.values.size(), 0);
  double in_vocab = 0;
  for (const auto& c : comps) {
    double denom = 1.0 - c.cats[0].oov;
    for (std::size_t v = 0; v < out.values.size(); ++v) out.probs[v] += c.weight * c.cats[0].probs[v] / denom;
    in_vocab += c.weight;
  }
  for (auto& p : out.probs) p /= in_vocab;
  out.oov = 0;
  return out;
}

// P(X <= x, hidden in box) / hidden_mass for one component of a univariate
// marginal (dimension 0 visible, the rest hidden).
double component_cdf(const Component& c, const std::vector<Interval>& box, double x) {
  const auto nh = static_cast<Eigen::Index>(box.size());
  double s = std::sqrt(c.cov(0, 0));
  double zx = (x - c.mean(0)) / s;
  if (nh == 0) return detail::norm_cdf(zx);
  if (nh == 1) {
    double sh = std::sqrt(c.cov(1, 1));
    double r = std::clamp(c.cov(0, 1) / (s * sh), -1.0, 1.0);
    double p = detail::bvn_mass(-kInf, zx, (box[0].lo - c.mean(1)) / sh, (box[0].hi - c.mean(1)) / sh, r);
    return std::min(1.0, p / c.hidden_mass);
  }
  // integrate the conditional box probability over the visible coordinate
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066845683909, 0.3626837833783620,
                               0.3626837833783620, 0.3137066845683909, 0.2223810344533745, 0.1012285362903763};
  VectorXd sxh = c.cov.block(1, 0, nh, 1) / c.cov(0, 0);
  MatrixXd hc = c.cov.bottomRightCorner(nh, nh) - sxh * c.cov.block(0, 1, 1, nh);
  double hi = std::min(zx, 12.0);
  double total = 0;
  for (double a = -12.0; a < hi; a += 0.25) {
    double b = std::min(a + 0.25, hi);
    double half = (b - a) / 2, mid = (a + b) / 2;
    for (int i = 0; i < 8; ++i) {
      double t = mid + half * gx[i];
      VectorXd mh = c.mean.tail(nh) + sxh * (t * s);
      total += gw[i] * half * std::exp(detail::norm_logpdf(t)) * detail::box_probability(mh, hc, box);
    }
  }
  return std::min(1.0, total / c.hidden_mass);
}

double mixture_cdf(const Density& m, double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  if (m.bindings()[0].slot == Density::Slot::Point) {
    const auto& pm = m.points()[0];
    return detail::norm_cdf((x - pm.value) / pm.eps);
  }
  double total = 0;
  for (const auto& c : m.components()) total += c.weight * component_cdf(c, m.hidden(), x);
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace

const std::vector<double>& DensityAccess::reference(const Density& d) {
  std::call_once(d.cache_->ref_once, [&] {
    Rng rng(kReferenceSeed);
    auto draws = sample(d, rng, kReferenceDraws);
    auto& ref = d.cache_->ref_logdens;
    for (const auto& x : draws) ref.push_back(log_density(d, x));
    std::sort(ref.begin(), ref.end());
  });
  return d.cache_->ref_logdens;
}

double cdf(const Density& d, const std::string& variable, double x) {
  const Variable& v = d.variable(variable);
  require_ordered(v);
  Density m = marginal(d, {variable});
  if (v.categorical) {
    auto t = categorical_marginal(m);
    double in = 0, below = 0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      in += t.probs[i];
      if (detail::numeric(t.values[i]) <= x) below += t.probs[i];
    }
    return std::clamp(below / in, 0.0, 1.0);
  }
  return mixture_cdf(m, x);
}

double interval_probability(const Density& d, const std::string& variable, const Interval& interval) {
  const Variable& v = d.variable(variable);
  require_ordered(v);
  if (interval.empty()) return 0.0;
  Density m = marginal(d, {variable});
  if (v.categorical) {
    auto t = categorical_marginal(m);
    double in = 0, hit = 0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      in += t.probs[i];
      if (interval.contains(detail::numeric(t.values[i]))) hit += t.probs[i];
    }
    return std::clamp(hit / in, 0.0, 1.0);
  }
  if (interval.full()) return 1.0;
  if (m.bindings()[0].slot == Density::Slot::Point) {
    const auto& pm = m.points()[0];
    return detail::norm_mass((interval.lo - pm.value) / pm.eps, (interval.hi - pm.value) / pm.eps);
  }
  if (m.hidden().empty()) {
    double total = 0;
    for (const auto& c : m.components()) {
      double s = std::sqrt(c.cov(0, 0));
      total += c.weight * detail::norm_mass((interval.lo - c.mean(0)) / s, (interval.hi - c.mean(0)) / s);
    }
    return std::clamp(total, 0.0, 1.0);
  }
  return std::clamp(mixture_cdf(m, interval.hi) - mixture_cdf(m, interval.lo), 0.0, 1.0);
}

double mean(const Density& d, const std::string& variable) {
  const Variable& v = d.variable(variable);
  require_ordered(v);
  Density m = marginal(d, {variable});
  if (v.categorical) {
    auto t = categorical_marginal(m);
    double in = 0, s = 0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      in += t.probs[i];
      s += t.probs[i] * detail::numeric(t.values[i]);
    }
    return s / in;
  }
  if (m.bindings()[0].slot == Density::Slot::Point) return m.points()[0].value;
  const auto nh = m.hidden().size();
  if (nh == 0 || nh == 1) {
    double s = 0;
    for (const auto& c : m.components()) {
      double mu = c.mean(0);
      if (nh == 1) {
        double sh = std::sqrt(c.cov(1, 1));
        const auto& iv = m.hidden()[0];
        double eh = sh * detail::truncated_normal_mean((iv.lo - c.mean(1)) / sh, (iv.hi - c.mean(1)) / sh);
        mu += c.cov(0, 1) / c.cov(1, 1) * eh;
      }
      s += c.weight * mu;
    }
    return s;
  }
  Rng rng(kReferenceSeed);
  auto draws = sample(m, rng, 16384);
  double s = 0;
  for (const auto& r : draws) s += detail::numeric(r[0]);
  return s / static_cast<double>(draws.size());
}

double quantile_score(const Density& d, const std::vector<Scalar>& point) {
  if (d.empty()) throw Error(ErrorCode::EmptyDensity, "cannot score against an empty density");
  double lp = log_density(d, point);
  if (d.family() == Family::Categorical && d.points().empty()) {
    double p = std::exp(lp), below = 0, total = 0;
    for (double q : d.table().probs) {
      total += q;
      if (q <= p) below += q;
    }
    return std::clamp(below / total, 0.0, 1.0);
  }
  const auto& ref = DensityAccess::reference(d);
  auto below = std::upper_bound(ref.begin(), ref.end(), lp) - ref.begin();
  return static_cast<double>(below) / static_cast<double>(ref.size());
}

double divergence(const Density& a, const Density& b) {
  auto names = [](const Density& d) {
    std::vector<std::string> n;
    for (const auto& v : d.variables()) n.push_back(v.name);
    std::sort(n.begin(), n.end());
    return n;
  };
  auto na = names(a), nb = names(b);
  if (na != nb) throw Error(ErrorCode::VariableMismatch, "densities are over different variables");
  for (const auto& v : a.variables()) {
    if (b.variable(v.name).categorical != v.categorical) {
      throw Error(ErrorCode::VariableMismatch, "variable '" + v.name + "' is categorical on one side only");
    }
  }
  if (a.empty()) return 0.0;
  Density p = marginal(a, na), q = marginal(b, nb);
  if (p.fingerprint() > q.fingerprint()) std::swap(p, q);
  Rng rp(kDivergenceSeedP), rq(kDivergenceSeedQ);
  const double ln2 = std::log(2.0);
  auto half = [&](const Density& from, const Density& other, Rng& rng) {
    long double acc = 0;
    auto draws = sample(from, rng, kDivergenceDraws);
    for (const auto& x : draws) {
      double lf = log_density(from, x);
      double lo = log_density(other, x);
      double terms[2] = {lf, lo};
      double lm = detail::log_sum_exp(terms, 2) - ln2;
      acc += lf - lm;
    }
    return static_cast<double>(acc / static_cast<long double>(draws.size()));
  };
  double js = 0.5 * (half(p, q, rp) + half(q, p, rq)) / ln2;
  return std::clamp(js, 0.0, 1.0);
}

}  // namespace psm::density
