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

#include "internal.hpp"
#include "psm/core/error.hpp"
#include "special.hpp"

namespace psm::density {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::size_t pick(const std::vector<double>& cum, double u) {
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) return cum.size() - 1;
  return static_cast<std::size_t>(it - cum.begin());
}

Scalar continuous_value(const Variable& v, double x) {
  if (v.kind == ScalarKind::Int) return static_cast<std::int64_t>(std::llround(x));
  return x;
}

// Gibbs sweeps over a Gaussian restricted to a box, started from the
// box-clamped mean.
VectorXd sample_box(const VectorXd& mean, const MatrixXd& cov, const std::vector<Interval>& box, Rng& rng) {
  const auto n = mean.size();
  if (n == 1) {
    double s = std::sqrt(cov(0, 0));
    VectorXd h(1);
    h(0) = mean(0) + s * detail::truncated_normal((box[0].lo - mean(0)) / s, (box[0].hi - mean(0)) / s, rng);
    return h;
  }
  MatrixXd prec = cov.inverse();
  VectorXd h(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& iv = box[static_cast<std::size_t>(j)];
    double lo = std::isfinite(iv.lo) ? iv.lo : mean(j) - 10 * std::sqrt(cov(j, j));
    double hi = std::isfinite(iv.hi) ? iv.hi : mean(j) + 10 * std::sqrt(cov(j, j));
    h(j) = std::clamp(mean(j), std::min(lo, hi), std::max(lo, hi));
  }
  for (int sweep = 0; sweep < 30; ++sweep) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double var = 1.0 / prec(j, j);
      double m = mean(j);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != j) m -= var * prec(j, i) * (h(i) - mean(i));
      }
      double s = std::sqrt(var);
      const auto& iv = box[static_cast<std::size_t>(j)];
      h(j) = m + s * detail::truncated_normal((iv.lo - m) / s, (iv.hi - m) / s, rng);
    }
  }
  return h;
}

}  // namespace

std::vector<std::vector<Scalar>> sample(const Density& d, Rng& rng, std::size_t n) {
  std::vector<std::vector<Scalar>> out;
  if (n == 0) return out;
  if (d.empty()) return std::vector<std::vector<Scalar>>(n);
  const auto& vars = d.variables();
  const auto& binds = d.bindings();
  const auto nv = static_cast<Eigen::Index>(d.continuous_dims());
  const auto nh = static_cast<Eigen::Index>(d.hidden().size());
  std::vector<double> comp_cum;
  if (d.family() == Family::Mixture) {
    double s = 0;
    for (const auto& c : d.components()) comp_cum.push_back(s += c.weight);
    for (auto& c : comp_cum) c /= s;
  }
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<Scalar> row(vars.size());
    if (d.family() == Family::Categorical) {
      const auto& cum = DensityAccess::joint_cum(d);
      const auto& tuple = d.table().tuples[pick(cum, rng.uniform())];
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (binds[i].slot == Density::Slot::Categorical) row[i] = tuple[static_cast<std::size_t>(binds[i].index)];
      }
    } else {
      const auto& prep = DensityAccess::prep(d);
      std::size_t k = pick(comp_cum, rng.uniform());
      const auto& c = d.components()[k];
      const auto& p = prep[k];
      VectorXd x = c.mean.head(nv);
      if (nh > 0) {
        VectorXd h = sample_box(c.mean.tail(nh), p.hid_cov, d.hidden(), rng);
        x += p.v_on_h * (h - c.mean.tail(nh));
      }
      if (nv > 0) {
        VectorXd z(nv);
        for (Eigen::Index i = 0; i < nv; ++i) z(i) = rng.normal();
        x += p.v_cond_chol * z;
      }
      std::vector<std::size_t> cat_pick(c.cats.size());
      for (std::size_t j = 0; j < c.cats.size(); ++j) cat_pick[j] = pick(p.cat_cum[j], rng.uniform());
      for (std::size_t i = 0; i < vars.size(); ++i) {
        const auto& b = binds[i];
        if (b.slot == Density::Slot::Continuous) row[i] = continuous_value(vars[i], x(b.index));
        if (b.slot == Density::Slot::Categorical) {
          auto j = static_cast<std::size_t>(b.index);
          row[i] = c.cats[j].values[cat_pick[j]];
        }
      }
    }
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (binds[i].slot != Density::Slot::Point) continue;
      const auto& pm = d.points()[static_cast<std::size_t>(binds[i].index)];
      row[i] = continuous_value(vars[i], pm.value + pm.eps * rng.normal());
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<Scalar> mode(const Density& d) {
  if (d.empty()) throw Error(ErrorCode::EmptyDensity, "empty density has no mode");
  const auto& vars = d.variables();
  const auto& binds = d.bindings();
  std::vector<Scalar> out(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (binds[i].slot == Density::Slot::Point) {
      out[i] = continuous_value(vars[i], d.points()[static_cast<std::size_t>(binds[i].index)].value);
    }
  }
  if (d.family() == Family::Categorical) {
    const auto& t = d.table();
    auto best = static_cast<std::size_t>(std::max_element(t.probs.begin(), t.probs.end()) - t.probs.begin());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (binds[i].slot == Density::Slot::Categorical) out[i] = t.tuples[best][static_cast<std::size_t>(binds[i].index)];
    }
    return out;
  }
  const auto nv = static_cast<Eigen::Index>(d.continuous_dims());
  const auto nh = static_cast<Eigen::Index>(d.hidden().size());
  const auto& prep = DensityAccess::prep(d);
  const auto& comps = d.components();
  auto log_resp = [&](const VectorXd& x, std::vector<double>& lr) {
    lr.assign(comps.size(), 0);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      VectorXd diff = x - comps[k].mean.head(nv);
      VectorXd y = prep[k].vis_chol.triangularView<Eigen::Lower>().solve(diff);
      double t = prep[k].log_weight - 0.5 * (prep[k].vis_logdet + y.squaredNorm());
      if (nh > 0) {
        VectorXd mh = comps[k].mean.tail(nh) + prep[k].h_on_v * diff;
        double pb = detail::box_probability(mh, prep[k].h_cond, d.hidden());
        t += (pb > 0 ? std::log(pb) : -kInf) - prep[k].log_hidden_mass;
      }
      lr[k] = t;
    }
    return detail::log_sum_exp(lr.data(), static_cast<int>(lr.size()));
  };
  VectorXd best_x = nv > 0 ? VectorXd(comps[0].mean.head(nv)) : VectorXd(0);
  std::vector<double> lr;
  if (nv > 0) {
    std::vector<MatrixXd> precs;
    for (const auto& c : comps) precs.push_back(c.cov.topLeftCorner(nv, nv).inverse());
    double best = -kInf;
    for (const auto& start : comps) {
      VectorXd x = start.mean.head(nv);
      for (int it = 0; it < 500; ++it) {
        double norm = log_resp(x, lr);
        MatrixXd a = MatrixXd::Zero(nv, nv);
        VectorXd b = VectorXd::Zero(nv);
        for (std::size_t k = 0; k < comps.size(); ++k) {
          double r = std::exp(lr[k] - norm);
          a += r * precs[k];
          b += r * precs[k] * comps[k].mean.head(nv);
        }
        VectorXd nx = a.ldlt().solve(b);
        double step = (nx - x).norm();
        x = nx;
        if (step <= 1e-12 * (1 + x.norm())) break;
      }
      double v = log_resp(x, lr);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
  }
  double norm = nv > 0 ? log_resp(best_x, lr) : 0.0;
  if (nv == 0) {
    lr.clear();
    for (const auto& p : prep) lr.push_back(p.log_weight);
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& b = binds[i];
    if (b.slot == Density::Slot::Continuous) out[i] = continuous_value(vars[i], best_x(b.index));
    if (b.slot != Density::Slot::Categorical) continue;
    auto j = static_cast<std::size_t>(b.index);
    const auto& values = comps[0].cats[j].values;
    std::vector<double> mass(values.size(), 0);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      double r = std::exp(lr[k] - norm);
      for (std::size_t v = 0; v < values.size(); ++v) mass[v] += r * comps[k].cats[j].probs[v];
    }
    out[i] = values[static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin())];
  }
  return out;
}

}  // namespace psm::density
