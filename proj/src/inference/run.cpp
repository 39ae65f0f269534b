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

#include "psm/core/rng.hpp"
#include "psm/inference/query.hpp"

namespace psm::inference {

using density::Constraint;
using density::Density;
using density::kInf;
using network::Histogram;
using network::kHistogramBins;

namespace {

constexpr std::size_t kSummaryDraws = 4096;

const structure::VariableSpec& require_variable(const network::ModelNode& node, const std::string& name) {
  const auto* v = node.find_variable(name);
  if (!v) throw Error(ErrorCode::UnknownVariable, "node '" + node.id + "' has no variable '" + name + "'");
  if (node.density.index_of(name) < 0) {
    throw Error(ErrorCode::UnknownVariable,
                "variable '" + name + "' of node '" + node.id + "' was never observed and has no model");
  }
  return *v;
}

// Literal written as 80 for a float variable, or 3.0 for an int one.
Scalar coerce(const structure::VariableSpec& v, const Scalar& x) {
  if (v.kind == ScalarKind::Float && std::holds_alternative<std::int64_t>(x)) {
    return static_cast<double>(std::get<std::int64_t>(x));
  }
  if (v.kind == ScalarKind::Int && std::holds_alternative<double>(x)) {
    double d = std::get<double>(x);
    if (std::isfinite(d) && std::floor(d) == d) return static_cast<std::int64_t>(d);
  }
  return x;
}

std::vector<Constraint> prepared(const network::ModelNode& node, const std::vector<Constraint>& cs) {
  std::vector<Constraint> out;
  for (const auto& c : cs) {
    const auto& v = require_variable(node, c.variable);
    Constraint p = c;
    if (p.point) p.point = coerce(v, *p.point);
    out.push_back(std::move(p));
  }
  return out;
}

bool ordered(ScalarKind k) { return k == ScalarKind::Int || k == ScalarKind::Float; }

double quantile(const Density& m, const std::string& var, double p, double lo, double hi) {
  double span = std::max(hi - lo, 1e-9);
  double a = lo - 10 * span, b = hi + 10 * span;
  for (int i = 0; i < 200 && b - a > 1e-12 * (1 + std::abs(a) + std::abs(b)); ++i) {
    double mid = 0.5 * (a + b);
    if (density::cdf(m, var, mid) < p) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

VariableSummary summarize(const Density& d, const std::string& variable, std::uint64_t seed) {
  VariableSummary s;
  s.variable = variable;
  Density m = density::marginal(d, {variable});
  const auto& v = m.variables()[0];
  s.mode = density::mode(m)[0];
  if (v.categorical) {
    std::vector<Scalar> vocab;
    if (m.family() == density::Family::Categorical) {
      for (const auto& t : m.table().tuples) vocab.push_back(t[0]);
    } else {
      vocab = m.components()[0].cats[0].values;
    }
    Histogram h;
    h.variable = variable;
    h.categorical = true;
    double total = 0;
    for (const auto& x : vocab) {
      double p = std::exp(density::log_density(m, {x}));
      h.values.push_back(x);
      h.mass.push_back(p);
      total += p;
    }
    for (auto& p : h.mass) p /= total;
    h.count = m.info().samples;
    if (ordered(v.kind)) {
      double mean = 0, sq = 0, cum = 0;
      for (std::size_t i = 0; i < vocab.size(); ++i) {
        double x = as_double(vocab[i]);
        mean += h.mass[i] * x;
        sq += h.mass[i] * x * x;
      }
      s.mean = mean;
      s.sd = std::sqrt(std::max(0.0, sq - mean * mean));
      for (std::size_t i = 0; i < vocab.size(); ++i) {
        cum += h.mass[i];
        double x = as_double(vocab[i]);
        if (!s.q05 && cum >= 0.05) s.q05 = x;
        if (!s.median && cum >= 0.5) s.median = x;
        if (!s.q95 && cum >= 0.95) s.q95 = x;
      }
    }
    s.histogram = std::move(h);
    return s;
  }
  Rng rng(seed);
  auto draws = density::sample(m, rng, kSummaryDraws);
  double lo = kInf, hi = -kInf, sum = 0, sq = 0;
  for (const auto& r : draws) {
    double x = as_double(r[0]);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
    sq += x * x;
  }
  double n = static_cast<double>(draws.size());
  double pad = hi > lo ? 0.01 * (hi - lo) : std::max(1e-9, 1e-6 * std::abs(lo));
  lo -= pad;
  hi += pad;
  Histogram h;
  h.variable = variable;
  h.lo = lo;
  h.hi = hi;
  h.count = m.info().samples;
  const double w = (hi - lo) / kHistogramBins;
  double prev = 0;
  for (int b = 0; b < kHistogramBins; ++b) {
    double edge = b + 1 == kHistogramBins ? kInf : lo + (b + 1) * w;
    double c = edge == kInf ? 1.0 : density::cdf(m, variable, edge);
    h.mass.push_back(std::max(0.0, c - prev));
    prev = std::max(prev, c);
  }
  s.histogram = std::move(h);
  s.mean = density::mean(m, variable);
  s.sd = std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n)));
  s.q05 = quantile(m, variable, 0.05, lo, hi);
  s.median = quantile(m, variable, 0.5, lo, hi);
  s.q95 = quantile(m, variable, 0.95, lo, hi);
  return s;
}

QueryResult run(const network::ModelNetwork& net, const Query& q, const RunOptions& options) {
  const network::ModelNode& node = net.fitted_node(q.node, options.allow_low_confidence);
  QueryResult r;
  r.query = q;
  r.seed = q.seed.value_or(options.seed);
  r.samples = node.samples;
  r.low_confidence = node.low_confidence;
  if (node.low_confidence) r.notes.push_back("node '" + node.id + "' is low-confidence");
  std::vector<Constraint> cs = prepared(node, q.constraints);
  for (const auto& t : q.targets) {
    require_variable(node, t);
    for (const auto& c : cs) {
      if (c.variable == t) {
        throw Error(ErrorCode::InvalidParams, "variable '" + t + "' is both a target and a condition");
      }
    }
  }
  switch (q.kind) {
    case QueryKind::Probability: {
      if (!q.event) throw Error(ErrorCode::InvalidParams, "probability query needs an event");
      const auto& v = require_variable(node, q.event->variable);
      Density d = density::condition(node.density, cs);
      if (q.event->point) {
        Density m = density::marginal(d, {v.name});
        if (!m.variables()[0].categorical) {
          throw Error(ErrorCode::InvalidParams, "'" + v.name +
                                                    "' is continuous: a single value has probability zero; use an "
                                                    "interval or SCORE");
        }
        r.value = std::exp(density::log_density(m, {coerce(v, *q.event->point)}));
      } else {
        r.value = density::interval_probability(d, v.name, q.event->interval);
      }
      break;
    }
    case QueryKind::Distribution: {
      if (q.targets.empty()) throw Error(ErrorCode::InvalidParams, "distribution query needs a target");
      Density d = density::condition(node.density, cs);
      for (std::size_t i = 0; i < q.targets.size(); ++i) {
        r.distributions.push_back(summarize(d, q.targets[i], Rng(r.seed).split(i).next_u64()));
      }
      break;
    }
    case QueryKind::Sample: {
      Density d = density::condition(node.density, cs);
      std::vector<std::string> cols = q.targets;
      if (cols.empty()) {
        for (const auto& v : d.variables()) cols.push_back(v.name);
      }
      if (!cols.empty()) d = density::marginal(d, cols);
      Rng rng(r.seed);
      r.columns = cols;
      r.rows = density::sample(d, rng, q.n);
      break;
    }
    case QueryKind::Score: {
      if (q.point.empty()) throw Error(ErrorCode::InvalidParams, "score query needs values");
      std::vector<std::string> vars;
      std::vector<Scalar> point;
      for (const auto& [name, value] : q.point) {
        const auto& v = require_variable(node, name);
        vars.push_back(name);
        point.push_back(coerce(v, value));
      }
      r.value = density::quantile_score(density::marginal(node.density, vars), point);
      break;
    }
    case QueryKind::Divergence: {
      if (!options.other) throw Error(ErrorCode::InvalidParams, "divergence query needs a comparison network");
      const auto& other = options.other->fitted_node(q.node, options.allow_low_confidence);
      r.value = density::divergence(node.density, other.density);
      r.notes.push_back("compared with '" + q.other + "' (" + std::to_string(other.samples) + " samples)");
      break;
    }
  }
  return r;
}

Json to_json(const QueryResult& r) {
  auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? Json(*v) : Json(nullptr); };
  Json j{{"query", to_json(r.query)}, {"kind", query_kind_name(r.query.kind)}, {"node", r.query.node}};
  if (r.value) j["value"] = opt(r.value);
  if (r.query.kind == QueryKind::Distribution) {
    Json ds = Json::array();
    for (const auto& s : r.distributions) {
      ds.push_back({{"variable", s.variable},
                    {"histogram", network::to_json(s.histogram)},
                    {"mean", opt(s.mean)},
                    {"sd", opt(s.sd)},
                    {"q05", opt(s.q05)},
                    {"median", opt(s.median)},
                    {"q95", opt(s.q95)},
                    {"mode", scalar_to_json(s.mode)}});
    }
    j["distributions"] = ds;
  }
  if (r.query.kind == QueryKind::Sample) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
      Json jr = Json::array();
      for (const auto& x : row) jr.push_back(scalar_to_json(x));
      rows.push_back(jr);
    }
    j["columns"] = r.columns;
    j["rows"] = rows;
  }
  j["provenance"] = {{"node", r.query.node},
                     {"samples", r.samples},
                     {"low_confidence", r.low_confidence},
                     {"seed", r.seed}};
  j["notes"] = r.notes;
  return j;
}

}  // namespace psm::inference
