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

#include "psm/inference/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gtest/gtest.h"
#include "pipeline_util.hpp"
#include "psm/core/rng.hpp"

namespace psm::inference {
namespace {

using density::Interval;
using psm::testing::corpus_pipeline;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

std::size_t syntax_position(const std::string& text) {
  try {
    parse_query(text);
  } catch (const QuerySyntaxError& e) {
    return e.position();
  }
  return std::string::npos;
}

QueryResult ask(const std::string& text, std::uint64_t seed = 1) {
  return run(corpus_pipeline().net, parse_query(text), {seed, true, nullptr});
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double best = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return best;
}

std::vector<double> trace_column(const std::string& node, const std::string& var) {
  std::vector<double> out;
  for (const auto& r : corpus_pipeline().rows.at(node).rows) out.push_back(as_double(r.cells.at(var)));
  return out;
}

TEST(ParseTest, DocumentedForms) {
  Query p = parse_query("P(Person.weight > 80)");
  EXPECT_EQ(p.kind, QueryKind::Probability);
  EXPECT_EQ(p.node, "Person");
  EXPECT_EQ(p.targets, (std::vector<std::string>{"weight"}));
  ASSERT_TRUE(p.event);
  EXPECT_EQ(p.event->interval, Interval::above(80));

  Query d = parse_query("DIST(Person.weight | 169 < Person.height < 170)");
  EXPECT_EQ(d.kind, QueryKind::Distribution);
  ASSERT_EQ(d.constraints.size(), 1u);
  EXPECT_EQ(d.constraints[0].variable, "height");
  EXPECT_EQ(d.constraints[0].interval, Interval::open(169, 170));

  Query s = parse_query("SAMPLE(Person, n=100)");
  EXPECT_EQ(s.kind, QueryKind::Sample);
  EXPECT_TRUE(s.targets.empty());
  EXPECT_EQ(s.n, 100u);
  EXPECT_EQ(parse_query("SAMPLE(Person, n=0)").n, 0u);

  Query sc = parse_query("SCORE(Person.weight = -10)");
  ASSERT_EQ(sc.point.size(), 1u);
  EXPECT_EQ(sc.point[0].second, Scalar{std::int64_t{-10}});

  Query e = parse_query("P([NutritionAdvisor.advice].return = \"normal\" | [NutritionAdvisor.advice].read.Person.height >= 180.5)");
  EXPECT_EQ(e.node, "NutritionAdvisor.advice");
  EXPECT_EQ(e.event->variable, "return");
  EXPECT_EQ(e.event->point, Scalar{std::string("normal")});
  EXPECT_EQ(e.constraints[0].variable, "read.Person.height");
  EXPECT_EQ(e.constraints[0].interval, Interval::at_least(180.5));

  Query v = parse_query("DIV(Person, other=\"old.psm\", seed=4)");
  EXPECT_EQ(v.other, "old.psm");
  EXPECT_EQ(v.seed, std::optional<std::uint64_t>(4));

  Query desc = parse_query("P(100 >= Person.weight > 60.5)");
  EXPECT_EQ(desc.event->interval, (Interval{60.5, 100, false, true}));
}

TEST(ParseTest, ErrorsCarryPositions) {
  EXPECT_EQ(syntax_position("Q(Person.weight > 1)"), 0u);
  EXPECT_EQ(syntax_position("P(Person.weight >> 1)"), 17u);
  EXPECT_EQ(syntax_position("P(Person.weight > 1"), 19u);
  EXPECT_EQ(syntax_position("P(Person.weight > 1 | Other.x < 2)"), 22u);
  EXPECT_EQ(syntax_position("P(5 < Person.weight < 3)"), 4u);
  EXPECT_EQ(syntax_position("P(5 < Person.weight > 3)"), 20u);
  EXPECT_EQ(syntax_position("SAMPLE(Person)"), 13u);
  EXPECT_EQ(syntax_position("SAMPLE(Person, n=-1)"), 17u);
  EXPECT_EQ(syntax_position("DIV(Person)"), 10u);
  EXPECT_EQ(syntax_position("P(Person.name = \"abc)"), 16u);
  EXPECT_EQ(syntax_position("P(Person.weight ? 3)"), 16u);
  EXPECT_EQ(code_of([] { parse_query("P(Person.weight > x)"); }), ErrorCode::QuerySyntaxError);
}

TEST(ParseTest, CanonicalRoundTrip) {
  for (const char* text : {"P(Person.weight > 80)", "P(Person.weight <= 80.25 | 169 < Person.height < 170)",
                           "DIST(Person.weight, Person.height)", "SAMPLE(Person.weight | Person.height >= 3, n=7)",
                           "SCORE(Person.weight = -10, Person.height = 1.5e+20)", "DIV([A.b], other=\"x\\\"y\")",
                           "P(-inf < Person.weight < inf)", "P([T].flag = true, seed=9)",
                           "SAMPLE(Person, n=3, seed=2)"}) {
    Query q = parse_query(text);
    std::string canon = to_string(q);
    EXPECT_EQ(parse_query(canon), q) << text << " -> " << canon;
    EXPECT_EQ(to_string(parse_query(canon)), canon);
    EXPECT_EQ(query_from_json(to_json(q)), q) << text;
    EXPECT_EQ(query_from_json(Json{{"query", text}}), q);
  }
  EXPECT_EQ(to_string(parse_query("P(Person.weight>80)")), "P(Person.weight > 80.0)");
}

TEST(ParseTest, GeneratedQueriesRoundTrip) {
  Rng rng(5);
  const std::vector<std::string> nodes = {"Person", "NutritionAdvisor.advice", "T_1"};
  const std::vector<std::string> vars = {"weight", "read.Person.height", "x"};
  auto interval = [&] {
    double a = std::round(rng.uniform(-100, 100) * 8) / 8, b = a + 1 + std::round(rng.uniform(0, 50) * 4) / 4;
    switch (rng.below(4)) {
      case 0: return Interval{a, b, rng.uniform() < 0.5, rng.uniform() < 0.5};
      case 1: return Interval{a, density::kInf, rng.uniform() < 0.5, false};
      case 2: return Interval{-density::kInf, b, false, rng.uniform() < 0.5};
      default: return Interval{};
    }
  };
  for (int t = 0; t < 300; ++t) {
    Query q;
    q.node = nodes[rng.below(nodes.size())];
    q.kind = static_cast<QueryKind>(rng.below(4));
    for (int c = 0, nc = static_cast<int>(rng.below(3)); c < nc; ++c) {
      if (rng.uniform() < 0.3) {
        q.constraints.push_back(density::Constraint::at(vars[rng.below(3)], Scalar{std::int64_t(rng.below(10))}));
      } else {
        q.constraints.push_back(density::Constraint::within(vars[rng.below(3)], interval()));
      }
    }
    if (rng.uniform() < 0.5) q.seed = rng.below(1000);
    switch (q.kind) {
      case QueryKind::Probability:
        q.event = density::Constraint::within(vars[0], interval());
        q.targets = {vars[0]};
        break;
      case QueryKind::Distribution:
        q.targets = {vars[rng.below(3)], vars[rng.below(3)]};
        break;
      case QueryKind::Sample:
        if (rng.uniform() < 0.5) q.targets = {vars[1]};
        q.n = rng.below(100);
        break;
      default:
        q.constraints.clear();
        q.point = {{vars[2], Scalar{rng.uniform()}}, {vars[0], Scalar{std::string("a\"b")}}};
        break;
    }
    EXPECT_EQ(parse_query(to_string(q)), q) << to_string(q);
  }
}

TEST(RunTest, TailProbabilityMatchesTrace) {
  auto ws = trace_column("Person", "weight");
  double frac = static_cast<double>(std::count_if(ws.begin(), ws.end(), [](double w) { return w > 80.0; })) / ws.size();
  auto r = ask("P(Person.weight > 80.0)");
  ASSERT_TRUE(r.value);
  EXPECT_NEAR(*r.value, frac, 0.02);
  EXPECT_EQ(r.samples, 10000u);
  EXPECT_FALSE(r.low_confidence);
}

TEST(RunTest, ConditionalMeanMatchesRejectionOracle) {
  auto r = ask("DIST(Person.weight | 169 < Person.height < 170)");
  ASSERT_EQ(r.distributions.size(), 1u);
  const auto& s = r.distributions[0];
  // rejection oracle: 10^4 accepted draws from the unconditioned model
  const auto& d = corpus_pipeline().net.node("Person").density;
  Rng rng(17);
  std::vector<double> kept;
  int hi = d.index_of("height"), wi = d.index_of("weight");
  while (kept.size() < 10000) {
    for (const auto& row : density::sample(d, rng, 20000)) {
      double h = as_double(row[static_cast<std::size_t>(hi)]);
      if (h > 169 && h < 170 && kept.size() < 10000) kept.push_back(as_double(row[static_cast<std::size_t>(wi)]));
    }
  }
  double oracle = std::accumulate(kept.begin(), kept.end(), 0.0) / kept.size();
  ASSERT_TRUE(s.mean);
  EXPECT_NEAR(*s.mean, oracle, 0.02 * oracle);
  double total = std::accumulate(s.histogram.mass.begin(), s.histogram.mass.end(), 0.0);
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(s.histogram.mass.size(), 256u);
  EXPECT_LT(*s.q05, *s.median);
  EXPECT_LT(*s.median, *s.q95);
}

TEST(RunTest, ConditionThenSampleAgreesWithFiltering) {
  auto cond = ask("SAMPLE(Person.weight | 160 < Person.height < 175, n=10000)", 3);
  std::vector<double> direct;
  for (const auto& row : cond.rows) direct.push_back(as_double(row[0]));
  auto all = ask("SAMPLE(Person, n=40000)", 4);
  ASSERT_EQ(all.columns, (std::vector<std::string>{"height", "weight"}));
  std::vector<double> filtered;
  for (const auto& row : all.rows) {
    double h = as_double(row[0]);
    if (h > 160 && h < 175 && filtered.size() < 10000) filtered.push_back(as_double(row[1]));
  }
  ASSERT_GE(filtered.size(), 10000u);
  EXPECT_LT(ks_statistic(direct, filtered), 0.05);
}

TEST(RunTest, SupportComplementAndMonotonicity) {
  const auto& net = corpus_pipeline().net;
  for (const auto& [id, node] : net.nodes()) {
    if (!node.fitted || node.density.empty()) continue;
    for (const auto& v : node.variables) {
      if (v.kind != ScalarKind::Float && v.kind != ScalarKind::Int) continue;
      Query q;
      q.kind = QueryKind::Probability;
      q.node = id;
      q.targets = {v.name};
      q.event = density::Constraint::within(v.name, Interval{});
      EXPECT_NEAR(*run(net, q).value, 1.0, 1e-9) << id << "." << v.name;
      double m = node.density.info().stats.at(v.name).mean;
      q.event = density::Constraint::within(v.name, Interval::above(m));
      double above = *run(net, q).value;
      q.event = density::Constraint::within(v.name, Interval::at_most(m));
      EXPECT_NEAR(above + *run(net, q).value, 1.0, 1e-9) << id << "." << v.name;
    }
  }
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    double a = rng.uniform(40, 100), b = a + rng.uniform(0, 20), e = rng.uniform(0, 5);
    auto inner = ask("P(" + format_double(a) + " < Person.weight < " + format_double(b) + ")");
    auto outer = ask("P(" + format_double(a - e) + " < Person.weight < " + format_double(b + e) + ")");
    EXPECT_LE(*inner.value, *outer.value + 1e-12);
  }
}

TEST(RunTest, CategoricalReturnProbability) {
  const auto& rows = corpus_pipeline().rows.at("NutritionAdvisor.advice").rows;
  double normal = 0;
  for (const auto& r : rows) normal += r.cells.at("return") == Scalar{std::string("normal")} ? 1 : 0;
  auto r = ask("P([NutritionAdvisor.advice].return = \"normal\")");
  EXPECT_NEAR(*r.value, normal / rows.size(), 0.02);
  auto heavy = ask("P([NutritionAdvisor.advice].return = \"obese\" | [NutritionAdvisor.advice].read.Person.weight > 95)");
  EXPECT_GT(*heavy.value, *ask("P([NutritionAdvisor.advice].return = \"obese\")").value);
  auto dist = ask("DIST([NutritionAdvisor.advice].return)");
  EXPECT_EQ(dist.distributions[0].histogram.values.size(), 4u);
  EXPECT_EQ(dist.distributions[0].mode, Scalar{std::string("normal")});
}

TEST(RunTest, ScoresAndEmptySample) {
  auto low = ask("SCORE(Person.weight = -10)");
  EXPECT_LT(*low.value, 0.001);
  auto empty = ask("SAMPLE(Person, n=0)");
  EXPECT_TRUE(empty.rows.empty());
  auto self = run(corpus_pipeline().net, parse_query("DIV(Person, other=\"self\")"), {1, true, &corpus_pipeline().net});
  EXPECT_LT(*self.value, 0.01);
}

TEST(RunTest, Errors) {
  EXPECT_EQ(code_of([] { ask("P(Nope.x > 1)"); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([] { ask("P(Person.age > 1)"); }), ErrorCode::UnknownVariable);
  EXPECT_EQ(code_of([] { ask("P(Person.weight = 70)"); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { ask("DIST(Person.weight | Person.weight > 3)"); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { ask("P(Person.weight > 1 | 500 < Person.height < 501)"); }),
            ErrorCode::ZeroProbabilityCondition);
  EXPECT_EQ(code_of([] { ask("DIV(Person, other=\"x\")"); }), ErrorCode::InvalidParams);
  auto p = psm::testing::run_pipeline("nutrition_advisor.ml0", 40, 1);
  trace::RowsByNode rows = p.rows;
  rows.erase("Person");
  network::ModelNetwork net = network::build(p.model);
  network::fit_all(net, rows, {}, 1);
  EXPECT_EQ(code_of([&] { run(net, parse_query("P(Person.weight > 1)")); }), ErrorCode::UnfittedNode);
}

TEST(RunTest, DeterministicGivenSeed) {
  for (const char* text : {"DIST(Person.weight | 169 < Person.height < 170)", "SAMPLE(Person, n=50)",
                           "SCORE(Person.weight = 71.5)"}) {
    EXPECT_EQ(to_json(ask(text, 9)).dump(), to_json(ask(text, 9)).dump());
  }
  auto a = ask("SAMPLE(Person, n=5, seed=7)", 1), b = ask("SAMPLE(Person, n=5, seed=7)", 2);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.seed, 7u);
}

}  // namespace
}  // namespace psm::inference
