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
#include <map>
#include <set>

#include "internal.hpp"
#include "psm/core/error.hpp"
#include "special.hpp"

namespace psm::density {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using A = DensityAccess;

namespace {

enum class ColumnRole { Drop, Categorical, Continuous, Point };

struct ColumnPlan {
  ColumnRole role = ColumnRole::Drop;
  std::vector<Scalar> vocab;  // categorical
  double value = 0;           // point
  double center = 0, scale = 1;  // continuous standardization
};

double quantile_sorted(const std::vector<double>& v, double q) {
  double pos = q * static_cast<double>(v.size() - 1);
  auto i = static_cast<std::size_t>(pos);
  double f = pos - static_cast<double>(i);
  if (i + 1 >= v.size()) return v.back();
  return v[i] * (1 - f) + v[i + 1] * f;
}

ColumnStats column_stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  ColumnStats s;
  s.count = v.size();
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  long double sum = 0;
  for (double x : v) sum += x;
  s.mean = static_cast<double>(sum / static_cast<long double>(v.size()));
  long double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size() - 1))) : 0.0;
  return s;
}

// ---------------------------------------------------------------- EM

struct Pattern {
  std::vector<int> obs, mis;
  std::vector<int> rows;
  MatrixXd xo;  // |obs| x rows
};

struct EmData {
  int n = 0, d = 0;
  std::vector<int> vocab;          // per categorical column
  std::vector<std::vector<int>> codes;  // column -> row -> code (-1 missing)
  std::vector<Pattern> patterns;
  MatrixXd imputed;                // d x n, missing = 0
};

struct EmParams {
  std::vector<double> w;
  std::vector<VectorXd> mu;
  std::vector<MatrixXd> cov;
  std::vector<std::vector<ArrayXd>> cat;  // k -> column -> V+1 probabilities (last = oov)
  std::vector<bool> alive;
  int k() const { return static_cast<int>(w.size()); }
};

struct EmRun {
  EmParams params;
  double objective = -kInf;
  double loglik = -kInf;
  std::vector<double> trace;
  bool converged = false;
  int steps = 0;
  int live = 0;
};

class Em {
 public:
  Em(const EmData& data, const FitConfig& cfg, bool diagonal)
      : data_(data), cfg_(cfg), diagonal_(diagonal), lambda_(cfg.regularization * data.n) {}

  EmRun run(int k, Rng& rng) const {
    EmRun out;
    out.params = initialize(k, rng);
    MatrixXd resp;
    double prev = 0;
    for (;;) {
      double ll = 0;
      double obj = e_step(out.params, resp, ll);
      out.trace.push_back(obj);
      out.objective = obj;
      out.loglik = ll;
      if (out.steps > 0 && std::abs(obj - prev) <= cfg_.tolerance * std::abs(prev)) {
        out.converged = true;
        break;
      }
      if (out.steps >= cfg_.max_iterations) break;
      prev = obj;
      out.params = m_step(out.params, resp);
      ++out.steps;
    }
    out.live = 0;
    for (bool a : out.params.alive) out.live += a;
    return out;
  }

  double penalty(const EmParams& p) const {
    double pen = 0;
    for (int k = 0; k < p.k(); ++k) {
      if (!p.alive[static_cast<std::size_t>(k)]) continue;
      pen -= 0.5 * lambda_ * p.cov[static_cast<std::size_t>(k)].inverse().trace();
      for (const auto& t : p.cat[static_cast<std::size_t>(k)]) pen += cfg_.alpha * t.log().sum();
    }
    return pen;
  }

  int parameter_count(int live) const {
    int d = data_.d;
    int per = d + (diagonal_ ? d : d * (d + 1) / 2);
    for (int v : data_.vocab) per += v;
    return (live - 1) + live * per;
  }

 private:
  double e_step(const EmParams& p, MatrixXd& resp, double& loglik) const {
    const int n = data_.n, K = p.k();
    MatrixXd lp(K, n);
    for (int k = 0; k < K; ++k) {
      double lw = p.alive[static_cast<std::size_t>(k)] ? std::log(p.w[static_cast<std::size_t>(k)]) : -kInf;
      lp.row(k).setConstant(lw);
    }
    for (const auto& pat : data_.patterns) {
      if (pat.obs.empty()) continue;
      for (int k = 0; k < K; ++k) {
        auto ks = static_cast<std::size_t>(k);
        if (!p.alive[ks]) continue;
        MatrixXd l = detail::cholesky(detail::select(p.cov[ks], pat.obs, pat.obs));
        VectorXd mo = detail::select(p.mu[ks], pat.obs);
        MatrixXd y = l.triangularView<Eigen::Lower>().solve(pat.xo.colwise() - mo);
        double c = -0.5 * (static_cast<double>(pat.obs.size()) * detail::kLog2Pi + detail::log_det_from_chol(l));
        VectorXd maha = y.colwise().squaredNorm();
        for (std::size_t r = 0; r < pat.rows.size(); ++r) {
          lp(k, pat.rows[r]) += c - 0.5 * maha(static_cast<Eigen::Index>(r));
        }
      }
    }
    for (std::size_t j = 0; j < data_.codes.size(); ++j) {
      for (int k = 0; k < K; ++k) {
        auto ks = static_cast<std::size_t>(k);
        if (!p.alive[ks]) continue;
        ArrayXd lt = p.cat[ks][j].log();
        for (int i = 0; i < n; ++i) {
          int code = data_.codes[j][static_cast<std::size_t>(i)];
          if (code >= 0) lp(k, i) += lt(code);
        }
      }
    }
    Eigen::RowVectorXd top = lp.colwise().maxCoeff();
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(top(i))) top(i) = 0;
    }
    resp = (lp.rowwise() - top).array().exp().matrix();
    Eigen::RowVectorXd sums = resp.colwise().sum();
    resp.array().rowwise() /= sums.array();
    long double total = 0;
    for (int i = 0; i < n; ++i) total += top(i) + std::log(sums(i));
    loglik = static_cast<double>(total);
    return loglik + penalty(p);
  }

  EmParams m_step(const EmParams& old, const MatrixXd& resp) const {
    const int n = data_.n, d = data_.d, K = old.k();
    EmParams p = old;
    for (int k = 0; k < K; ++k) {
      auto ks = static_cast<std::size_t>(k);
      if (!old.alive[ks]) continue;
      double nk = resp.row(k).sum();
      if (!(nk > 1e-10)) {
        p.alive[ks] = false;
        p.w[ks] = 0;
        continue;
      }
      VectorXd s1 = VectorXd::Zero(d);
      MatrixXd s2 = MatrixXd::Zero(d, d);
      for (const auto& pat : data_.patterns) {
        const auto np = static_cast<Eigen::Index>(pat.rows.size());
        VectorXd r(np);
        for (Eigen::Index i = 0; i < np; ++i) r(i) = resp(k, pat.rows[static_cast<std::size_t>(i)]);
        double rs = r.sum();
        if (rs == 0) continue;
        if (pat.mis.empty()) {
          s1 += pat.xo * r;
          s2 += (pat.xo.array().rowwise() * r.transpose().array()).matrix() * pat.xo.transpose();
          continue;
        }
        MatrixXd xh(d, np);
        for (std::size_t o = 0; o < pat.obs.size(); ++o) xh.row(pat.obs[o]) = pat.xo.row(static_cast<Eigen::Index>(o));
        {
          const MatrixXd& cov = old.cov[ks];
          const VectorXd& mu = old.mu[ks];
          VectorXd mm = detail::select(mu, pat.mis);
          MatrixXd smm = detail::select(cov, pat.mis, pat.mis);
          MatrixXd fill;
          MatrixXd cmm = smm;
          if (!pat.obs.empty()) {
            MatrixXd soo = detail::select(cov, pat.obs, pat.obs);
            MatrixXd som = detail::select(cov, pat.obs, pat.mis);
            MatrixXd l = detail::cholesky(soo);
            MatrixXd gain = l.transpose().triangularView<Eigen::Upper>().solve(l.triangularView<Eigen::Lower>().solve(som));
            fill = (gain.transpose() * (pat.xo.colwise() - detail::select(mu, pat.obs))).colwise() + mm;
            cmm = smm - som.transpose() * gain;
          } else {
            fill = mm.replicate(1, np);
          }
          for (std::size_t m = 0; m < pat.mis.size(); ++m) xh.row(pat.mis[m]) = fill.row(static_cast<Eigen::Index>(m));
          for (std::size_t a = 0; a < pat.mis.size(); ++a) {
            for (std::size_t b = 0; b < pat.mis.size(); ++b) {
              s2(pat.mis[a], pat.mis[b]) += rs * cmm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            }
          }
        }
        s1 += xh * r;
        s2 += (xh.array().rowwise() * r.transpose().array()).matrix() * xh.transpose();
      }
      VectorXd mu = s1 / nk;
      MatrixXd scatter = s2 - nk * mu * mu.transpose();
      MatrixXd cov = (scatter + lambda_ * MatrixXd::Identity(d, d)) / nk;
      cov = 0.5 * (cov + cov.transpose());
      if (diagonal_) cov = MatrixXd(cov.diagonal().asDiagonal());
      p.mu[ks] = mu;
      p.cov[ks] = cov;
      p.w[ks] = nk / n;
      for (std::size_t j = 0; j < data_.codes.size(); ++j) {
        int v = data_.vocab[j];
        ArrayXd counts = ArrayXd::Zero(v + 1);
        for (int i = 0; i < n; ++i) {
          int code = data_.codes[j][static_cast<std::size_t>(i)];
          if (code >= 0) counts(code) += resp(k, i);
        }
        double total = counts.sum();
        p.cat[ks][j] = (counts + cfg_.alpha) / (total + cfg_.alpha * (v + 1));
      }
    }
    return p;
  }

  EmParams initialize(int K, Rng& rng) const {
    const int n = data_.n, d = data_.d;
    const MatrixXd& z = data_.imputed;
    // k-means++ seeding then a few Lloyd passes
    std::vector<VectorXd> centers;
    centers.push_back(z.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)))));
    VectorXd dist = (z.colwise() - centers[0]).colwise().squaredNorm().transpose();
    while (static_cast<int>(centers.size()) < K) {
      double total = dist.sum();
      Eigen::Index pickd = 0;
      if (total > 0) {
        double u = rng.uniform() * total, acc = 0;
        pickd = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += dist(i);
          if (acc > u) {
            pickd = i;
            break;
          }
        }
      } else {
        pickd = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      }
      centers.push_back(z.col(pickd));
      dist = dist.cwiseMin((z.colwise() - centers.back()).colwise().squaredNorm().transpose());
    }
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int pass = 0; pass < 10; ++pass) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int best = 0;
        double bd = kInf;
        for (int k = 0; k < K; ++k) {
          double dd = (z.col(i) - centers[static_cast<std::size_t>(k)]).squaredNorm();
          if (dd < bd) {
            bd = dd;
            best = k;
          }
        }
        changed |= assign[static_cast<std::size_t>(i)] != best;
        assign[static_cast<std::size_t>(i)] = best;
      }
      if (!changed && pass > 0) break;
      std::vector<VectorXd> sums(static_cast<std::size_t>(K), VectorXd::Zero(d));
      std::vector<int> counts(static_cast<std::size_t>(K), 0);
      for (int i = 0; i < n; ++i) {
        sums[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += z.col(i);
        counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]++;
      }
      for (int k = 0; k < K; ++k) {
        if (counts[static_cast<std::size_t>(k)] > 0) centers[static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)] / counts[static_cast<std::size_t>(k)];
      }
    }
    EmParams base;
    for (int k = 0; k < K; ++k) {
      base.w.push_back(1.0 / K);
      base.mu.push_back(VectorXd::Zero(d));
      base.cov.push_back(MatrixXd::Identity(d, d));
      std::vector<ArrayXd> cats;
      for (int v : data_.vocab) cats.push_back(ArrayXd::Constant(v + 1, 1.0 / (v + 1)));
      base.cat.push_back(std::move(cats));
      base.alive.push_back(true);
    }
    MatrixXd hard = MatrixXd::Zero(K, n);
    for (int i = 0; i < n; ++i) hard(assign[static_cast<std::size_t>(i)], i) = 1.0;
    return m_step(base, hard);
  }

  const EmData& data_;
  const FitConfig& cfg_;
  bool diagonal_;
  double lambda_;
};

// ---------------------------------------------------------------- fit

struct Plan {
  std::vector<ColumnPlan> cols;
  std::vector<int> cont, cats, points;  // column indices by role
};

Density build_shell(const Dataset& data, const Plan& plan, Family family) {
  Density d;
  A::family(d) = family;
  int nc = 0, nk = 0, np = 0;
  for (std::size_t j = 0; j < data.columns.size(); ++j) {
    const auto& c = plan.cols[j];
    if (c.role == ColumnRole::Drop) continue;
    Variable v{data.columns[j].name, data.columns[j].kind, c.role == ColumnRole::Categorical};
    A::vars(d).push_back(v);
    switch (c.role) {
      case ColumnRole::Continuous:
        A::bindings(d).push_back({Density::Slot::Continuous, nc++});
        break;
      case ColumnRole::Categorical:
        A::bindings(d).push_back({Density::Slot::Categorical, nk++});
        break;
      case ColumnRole::Point:
        A::bindings(d).push_back({Density::Slot::Point, np++});
        A::points(d).push_back({c.value, detail::point_eps(c.value)});
        break;
      case ColumnRole::Drop:
        break;
    }
  }
  A::continuous(d) = static_cast<std::size_t>(nc);
  return d;
}

int code_of(const ColumnPlan& c, const Scalar& v) { return detail::find_value(c.vocab, v); }

Density fit_joint(const Dataset& data, const Plan& plan, const FitConfig& cfg, FitInfo info) {
  Density d = build_shell(data, plan, Family::Categorical);
  auto less = [](const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), detail::scalar_less);
  };
  std::map<std::vector<Scalar>, std::size_t, decltype(less)> counts(less);
  std::size_t complete = 0;
  for (const auto& row : data.rows) {
    std::vector<Scalar> t;
    bool ok = true;
    for (int j : plan.cats) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (is_null(v)) {
        ok = false;
        break;
      }
      t.push_back(plan.cols[static_cast<std::size_t>(j)].vocab[static_cast<std::size_t>(code_of(plan.cols[static_cast<std::size_t>(j)], v))]);
    }
    if (!ok) continue;
    ++complete;
    counts[t]++;
  }
  if (complete == 0) throw Error(ErrorCode::NoData, "no row observes every categorical column");
  if (complete < data.rows.size()) {
    info.warnings.push_back(std::to_string(data.rows.size() - complete) + " incomplete rows skipped");
  }
  const double n = static_cast<double>(complete), a = cfg.alpha;
  const double v = static_cast<double>(counts.size());
  JointTable jt;
  for (const auto& [t, c] : counts) {
    jt.tuples.push_back(t);
    jt.probs.push_back((static_cast<double>(c) + a) / (n + a * (v + 1)));
  }
  jt.oov = a / (n + a * (v + 1));
  A::table(d) = std::move(jt);
  info.k = 0;
  d.mutable_info() = std::move(info);
  detail::normalize(d);
  return d;
}

void finish_mixture(Density& d, std::vector<Component> comps, FitInfo info) {
  double total = 0;
  for (const auto& c : comps) total += c.weight;
  for (auto& c : comps) c.weight /= total;
  A::components(d) = std::move(comps);
  info.k = static_cast<int>(A::components(d).size());
  d.mutable_info() = std::move(info);
  detail::normalize(d);
}

Density fit_kde(const Dataset& data, const Plan& plan, const FitConfig& cfg, FitInfo info) {
  Density d = build_shell(data, plan, Family::Mixture);
  const std::size_t n = data.rows.size();
  const double a = cfg.alpha / static_cast<double>(n);
  std::vector<double> h, var;
  for (int j : plan.cont) {
    const auto& s = info.stats.at(data.columns[static_cast<std::size_t>(j)].name);
    h.push_back(1.06 * s.sd * std::pow(static_cast<double>(s.count), -0.2));
    var.push_back(s.sd * s.sd);
  }
  std::vector<CategoricalTable> marg;
  for (int j : plan.cats) {
    const auto& col = plan.cols[static_cast<std::size_t>(j)];
    std::vector<double> counts(col.vocab.size(), 0);
    double obs = 0;
    for (const auto& row : data.rows) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (is_null(v)) continue;
      counts[static_cast<std::size_t>(code_of(col, v))] += 1;
      obs += 1;
    }
    double vv = static_cast<double>(col.vocab.size());
    CategoricalTable t{col.vocab, {}, cfg.alpha / (obs + cfg.alpha * (vv + 1))};
    for (double c : counts) t.probs.push_back((c + cfg.alpha) / (obs + cfg.alpha * (vv + 1)));
    marg.push_back(std::move(t));
  }
  std::vector<Component> comps;
  for (const auto& row : data.rows) {
    Component c;
    c.weight = 1.0 / static_cast<double>(n);
    const auto nc = static_cast<Eigen::Index>(plan.cont.size());
    c.mean = VectorXd(nc);
    c.cov = MatrixXd::Zero(nc, nc);
    for (std::size_t q = 0; q < plan.cont.size(); ++q) {
      const auto& v = row[static_cast<std::size_t>(plan.cont[q])];
      auto qi = static_cast<Eigen::Index>(q);
      if (is_null(v)) {
        c.mean(qi) = info.stats.at(data.columns[static_cast<std::size_t>(plan.cont[q])].name).mean;
        c.cov(qi, qi) = var[q] + h[q] * h[q];
      } else {
        c.mean(qi) = detail::numeric(v);
        c.cov(qi, qi) = h[q] * h[q];
      }
    }
    for (std::size_t q = 0; q < plan.cats.size(); ++q) {
      const auto& col = plan.cols[static_cast<std::size_t>(plan.cats[q])];
      const auto& v = row[static_cast<std::size_t>(plan.cats[q])];
      if (is_null(v)) {
        c.cats.push_back(marg[q]);
        continue;
      }
      double vv = static_cast<double>(col.vocab.size());
      double denom = 1 + a * (vv + 1);
      CategoricalTable t{col.vocab, std::vector<double>(col.vocab.size(), a / denom), a / denom};
      t.probs[static_cast<std::size_t>(code_of(col, v))] = (1 + a) / denom;
      c.cats.push_back(std::move(t));
    }
    comps.push_back(std::move(c));
  }
  info.low_confidence = true;
  info.converged = true;
  finish_mixture(d, std::move(comps), std::move(info));
  return d;
}

Density fit_em(const Dataset& data, const Plan& plan, const FitConfig& cfg, std::uint64_t seed, FitInfo info) {
  Density d = build_shell(data, plan, Family::Mixture);
  EmData em;
  em.n = static_cast<int>(data.rows.size());
  em.d = static_cast<int>(plan.cont.size());
  em.imputed = MatrixXd::Zero(em.d, em.n);
  std::map<std::vector<char>, std::size_t> pattern_index;
  for (int i = 0; i < em.n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    std::vector<char> mask(plan.cont.size());
    for (std::size_t q = 0; q < plan.cont.size(); ++q) {
      const auto& v = row[static_cast<std::size_t>(plan.cont[q])];
      mask[q] = !is_null(v);
      if (mask[q]) {
        const auto& col = plan.cols[static_cast<std::size_t>(plan.cont[q])];
        em.imputed(static_cast<Eigen::Index>(q), i) = (detail::numeric(v) - col.center) / col.scale;
      }
    }
    auto [it, inserted] = pattern_index.emplace(mask, em.patterns.size());
    if (inserted) {
      Pattern p;
      for (std::size_t q = 0; q < mask.size(); ++q) (mask[q] ? p.obs : p.mis).push_back(static_cast<int>(q));
      em.patterns.push_back(std::move(p));
    }
    em.patterns[it->second].rows.push_back(i);
  }
  for (auto& p : em.patterns) {
    p.xo.resize(static_cast<Eigen::Index>(p.obs.size()), static_cast<Eigen::Index>(p.rows.size()));
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      for (std::size_t o = 0; o < p.obs.size(); ++o) {
        p.xo(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(r)) = em.imputed(p.obs[o], p.rows[r]);
      }
    }
  }
  for (int j : plan.cats) {
    const auto& col = plan.cols[static_cast<std::size_t>(j)];
    em.vocab.push_back(static_cast<int>(col.vocab.size()));
    std::vector<int> codes;
    for (const auto& row : data.rows) {
      const auto& v = row[static_cast<std::size_t>(j)];
      codes.push_back(is_null(v) ? -1 : code_of(col, v));
    }
    em.codes.push_back(std::move(codes));
  }
  std::set<std::vector<double>> distinct;
  for (int i = 0; i < em.n && distinct.size() < static_cast<std::size_t>(cfg.kmax); ++i) {
    const double* c = em.imputed.col(i).data();
    distinct.insert(std::vector<double>(c, c + em.d));
  }
  const int kmax = std::min<int>(cfg.kmax, static_cast<int>(distinct.size()));
  const bool diagonal = em.d > cfg.full_covariance_max_dim;
  Em engine(em, cfg, diagonal);

  Rng base(seed);
  EmRun best_run;
  double best_bic = kInf;
  info.bic.assign(static_cast<std::size_t>(cfg.kmax), std::nan(""));
  info.em_steps = 0;
  int stale = 0;
  for (int k = 1; k <= kmax; ++k) {
    EmRun best_k;
    // a single component does not depend on the initialization
    const int restarts = k == 1 ? 1 : cfg.restarts;
    for (int r = 0; r < restarts; ++r) {
      Rng rng = base.split(static_cast<std::uint64_t>(k) * 1024 + static_cast<std::uint64_t>(r));
      EmRun run = engine.run(k, rng);
      info.em_steps += static_cast<std::size_t>(run.steps);
      if (run.objective > best_k.objective) best_k = std::move(run);
    }
    double bic = -2 * best_k.loglik + engine.parameter_count(best_k.live) * std::log(static_cast<double>(em.n));
    info.bic[static_cast<std::size_t>(k - 1)] = bic;
    if (k == 1 || bic < best_bic - 1e-9 * std::abs(best_bic)) {
      best_bic = bic;
      best_run = std::move(best_k);
      stale = 0;
    } else if (cfg.bic_patience > 0 && ++stale >= cfg.bic_patience) {
      break;
    }
  }
  info.objective_trace = best_run.trace;
  info.converged = best_run.converged;
  if (!best_run.converged) info.warnings.push_back("EM reached the iteration limit without converging");
  if (diagonal) info.warnings.push_back("diagonal covariance used above " + std::to_string(cfg.full_covariance_max_dim) + " dimensions");

  VectorXd center(em.d), scale(em.d);
  for (std::size_t q = 0; q < plan.cont.size(); ++q) {
    const auto& col = plan.cols[static_cast<std::size_t>(plan.cont[q])];
    center(static_cast<Eigen::Index>(q)) = col.center;
    scale(static_cast<Eigen::Index>(q)) = col.scale;
  }
  std::vector<Component> comps;
  const auto& p = best_run.params;
  for (int k = 0; k < p.k(); ++k) {
    auto ks = static_cast<std::size_t>(k);
    if (!p.alive[ks] || !(p.w[ks] > 0)) continue;
    Component c;
    c.weight = p.w[ks];
    c.mean = center + scale.cwiseProduct(p.mu[ks]);
    c.cov = scale.asDiagonal() * p.cov[ks] * scale.asDiagonal();
    for (std::size_t j = 0; j < plan.cats.size(); ++j) {
      const auto& col = plan.cols[static_cast<std::size_t>(plan.cats[j])];
      const ArrayXd& t = p.cat[ks][j];
      CategoricalTable table{col.vocab, {}, t(t.size() - 1)};
      for (Eigen::Index v = 0; v + 1 < t.size(); ++v) table.probs.push_back(t(v));
      c.cats.push_back(std::move(table));
    }
    comps.push_back(std::move(c));
  }
  finish_mixture(d, std::move(comps), std::move(info));
  return d;
}

}  // namespace

Density fit(const Dataset& data, const FitConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  FitInfo info;
  info.samples = data.rows.size();
  if (data.columns.empty()) {
    Density d;
    d.mutable_info() = info;
    return d;
  }
  if (data.rows.empty()) throw Error(ErrorCode::NoData, "no observations to fit");
  for (const auto& row : data.rows) {
    if (row.size() != data.columns.size()) throw Error(ErrorCode::SchemaMismatch, "row width does not match columns");
  }
  Plan plan;
  plan.cols.resize(data.columns.size());
  for (std::size_t j = 0; j < data.columns.size(); ++j) {
    const auto& column = data.columns[j];
    Variable var{column.name, column.kind, false};
    std::vector<Scalar> observed;
    for (const auto& row : data.rows) {
      if (is_null(row[j])) continue;
      detail::check_kind(var, row[j]);
      observed.push_back(row[j]);
    }
    auto& cp = plan.cols[j];
    if (observed.empty()) {
      info.warnings.push_back("column '" + column.name + "' has no observations; dropped");
      continue;
    }
    std::sort(observed.begin(), observed.end(), detail::scalar_less);
    std::vector<Scalar> vocab;
    for (const auto& v : observed) {
      if (vocab.empty() || !detail::scalar_equal(vocab.back(), v)) vocab.push_back(v);
    }
    bool numeric = column.kind == ScalarKind::Int || column.kind == ScalarKind::Float;
    if (numeric) {
      std::vector<double> xs;
      for (const auto& v : observed) xs.push_back(detail::numeric(v));
      info.stats[column.name] = column_stats(xs);
    }
    if (numeric && vocab.size() == 1) {
      cp.role = ColumnRole::Point;
      cp.value = detail::numeric(vocab[0]);
      info.warnings.push_back("column '" + column.name + "' is constant; modeled as a point mass");
      plan.points.push_back(static_cast<int>(j));
      continue;
    }
    bool integral = true;
    if (numeric) {
      for (const auto& v : vocab) integral = integral && std::floor(detail::numeric(v)) == detail::numeric(v);
    }
    if (!numeric || (integral && static_cast<int>(vocab.size()) <= cfg.categorical_max_distinct)) {
      cp.role = ColumnRole::Categorical;
      cp.vocab = std::move(vocab);
      plan.cats.push_back(static_cast<int>(j));
      continue;
    }
    const auto& s = info.stats[column.name];
    cp.role = ColumnRole::Continuous;
    cp.center = s.mean;
    cp.scale = s.sd > 0 ? s.sd : 1.0;
    plan.cont.push_back(static_cast<int>(j));
  }
  if (plan.cont.empty() && plan.cats.empty() && plan.points.empty()) {
    throw Error(ErrorCode::NoData, "no column has observations");
  }
  info.low_confidence = static_cast<int>(data.rows.size()) < cfg.min_samples;
  if (plan.cont.empty()) {
    if (!plan.cats.empty()) return fit_joint(data, plan, cfg, std::move(info));
    Density d = build_shell(data, plan, Family::Mixture);
    Component c;
    c.mean = VectorXd(0);
    c.cov = MatrixXd(0, 0);
    finish_mixture(d, {c}, std::move(info));
    return d;
  }
  if (info.low_confidence) return fit_kde(data, plan, cfg, std::move(info));
  return fit_em(data, plan, cfg, seed, std::move(info));
}

}  // namespace psm::density
