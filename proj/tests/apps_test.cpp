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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "pipeline_util.hpp"
#include "psm/apps/apps.hpp"
#include "psm/core/rng.hpp"

namespace psm::apps {
namespace {

using network::ModelNetwork;
using psm::testing::corpus_pipeline;
using psm::testing::run_pipeline;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

const psm::testing::Pipeline& v2_pipeline() {
  static const auto p = run_pipeline("nutrition_advisor_v2.ml0", 10000, 7);
  return p;
}

const psm::testing::Pipeline& meters_pipeline() {
  static const auto p = run_pipeline("nutrition_advisor_meters.ml0", 10000, 7);
  return p;
}

trace::Assembly live_run(const psm::testing::Pipeline& p, const std::string& driver, std::uint64_t seed) {
  ml0::ExecOptions opt;
  opt.entry = driver;
  opt.seed = seed;
  opt.iterations = 1;
  return trace::assemble_frames(ml0::execute(p.program, opt), p.model);
}

std::vector<double> column(const trace::NodeRows& rows, const std::string& var) {
  std::vector<double> out;
  for (const auto& r : rows.rows) {
    auto it = r.cells.find(var);
    if (it != r.cells.end() && is_numeric(it->second)) out.push_back(as_double(it->second));
  }
  return out;
}

// Jensen-Shannon divergence in bits between two samples on shared bins.
double binned_js(const std::vector<double>& a, const std::vector<double>& b, int bins = 64) {
  double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
  auto hist = [&](const std::vector<double>& xs) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double x : xs) {
      int k = std::clamp(static_cast<int>((x - lo) / (hi - lo) * bins), 0, bins - 1);
      h[static_cast<std::size_t>(k)] += 1.0 / static_cast<double>(xs.size());
    }
    return h;
  };
  auto p = hist(a), q = hist(b);
  double js = 0;
  for (int i = 0; i < bins; ++i) {
    double pi = p[static_cast<std::size_t>(i)], qi = q[static_cast<std::size_t>(i)], m = 0.5 * (pi + qi);
    if (pi > 0) js += 0.5 * pi * std::log2(pi / m);
    if (qi > 0) js += 0.5 * qi * std::log2(qi / m);
  }
  return js;
}

// Anomaly detection -----------------------------------------------------------

TEST(AnomalyTest, NegativeWeightIsDetected) {
  auto r = check(corpus_pipeline().net, {"Person", {{"weight", -10.0}}}, {});
  EXPECT_TRUE(r.detected);
  EXPECT_LT(r.score, 0.001);
  auto p = check(corpus_pipeline().net, {"Person.weight", {{"weight", Scalar{std::int64_t{-10}}}}}, {});
  EXPECT_TRUE(p.detected);
}

TEST(AnomalyTest, ModeIsNotDetected) {
  const auto& d = corpus_pipeline().net.node("Person").density;
  auto m = density::mode(d);
  Observation obs{"Person", {}};
  for (std::size_t i = 0; i < d.variables().size(); ++i) obs.values.emplace_back(d.variables()[i].name, m[i]);
  auto r = check(corpus_pipeline().net, obs, {});
  EXPECT_FALSE(r.detected);
  EXPECT_GT(r.score, 0.5);
}

TEST(AnomalyTest, LoweringTauNeverAddsDetections) {
  const auto& net = corpus_pipeline().net;
  for (double w : {-10.0, 30.0, 45.0, 55.0, 70.0, 90.0, 110.0, 140.0}) {
    bool previous = true;
    for (double tau : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
      AnomalyConfig cfg;
      cfg.tau = tau;
      bool d = check(net, {"Person", {{"weight", w}}}, cfg).detected;
      EXPECT_TRUE(previous || !d) << w << " " << tau;
      previous = d;
    }
  }
}

TEST(AnomalyTest, RippleReachesBmiOneFrameDown) {
  const auto& p = corpus_pipeline();
  auto live = live_run(p, "invalid_weight", 3);
  auto r = check(p.net, {"Person", {{"weight", -10.0}}}, {}, &live);
  EXPECT_TRUE(r.detected);
  EXPECT_EQ(r.origin_executable, "NutritionAdvisor.advice");
  ASSERT_EQ(r.ripple.size(), 1u);
  EXPECT_EQ(r.ripple[0].node, "BmiService.bmi");
  EXPECT_EQ(r.ripple[0].distance, 1);
  ASSERT_TRUE(r.ripple[0].score.has_value());
  EXPECT_LT(*r.ripple[0].score, 0.1);
  ASSERT_TRUE(r.distance.has_value());
  EXPECT_EQ(*r.distance, 1);
  Json j = to_json(r);
  EXPECT_EQ(j["distance"], 1);
  EXPECT_TRUE(j["perceived"].get<bool>());
}

TEST(AnomalyTest, TypicalRequestIsNeverPerceived) {
  const auto& p = corpus_pipeline();
  auto live = live_run(p, "request", 1);
  auto r = check(p.net, {"Person", {{"weight", 69.54}, {"height", 168.59}}}, {}, &live);
  EXPECT_FALSE(r.detected);
  EXPECT_EQ(r.ripple.size(), 1u);
  EXPECT_FALSE(r.distance.has_value());
  Json j = to_json(r);
  EXPECT_TRUE(j["distance"].is_null());
  EXPECT_FALSE(j["perceived"].get<bool>());
}

TEST(AnomalyTest, ScopeLimitsScoredNodes) {
  const auto& p = corpus_pipeline();
  auto live = live_run(p, "invalid_weight", 3);
  AnomalyConfig cfg;
  cfg.scope = {"Nutrition*"};
  auto r = check(p.net, {"Person", {{"weight", -10.0}}}, cfg, &live);
  ASSERT_EQ(r.ripple.size(), 1u);
  EXPECT_FALSE(r.ripple[0].score.has_value());
  EXPECT_FALSE(r.distance.has_value());
}

TEST(AnomalyTest, WithoutLiveRunNoRipple) {
  auto r = check(corpus_pipeline().net, {"Person", {{"weight", -10.0}}}, {});
  EXPECT_TRUE(r.ripple.empty());
  EXPECT_FALSE(r.origin_frame.has_value());
  EXPECT_FALSE(r.notes.empty());
}

TEST(AnomalyTest, Errors) {
  const auto& net = corpus_pipeline().net;
  AnomalyConfig bad;
  bad.tau = 0;
  EXPECT_EQ(code_of([&] { check(net, {"Person", {{"weight", 1.0}}}, bad); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([&] { check(net, {"Person", {}}, {}); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([&] { check(net, {"Person", {{"age", 1.0}}}, {}); }), ErrorCode::UnknownVariable);
  EXPECT_EQ(code_of([&] { check(net, {"Ghost", {{"x", 1.0}}}, {}); }), ErrorCode::UnknownNode);
}

// Test generation -------------------------------------------------------------

const char* kAdvice = "NutritionAdvisor.advice";

// Fraction of fresh draws whose density is below the point's.
double oracle_score(const density::Density& d, const std::vector<Scalar>& x, std::size_t draws = 20000) {
  Rng rng(99);
  double lx = density::log_density(d, x);
  std::size_t below = 0;
  for (const auto& r : density::sample(d, rng, draws)) below += density::log_density(d, r) < lx;
  return static_cast<double>(below) / static_cast<double>(draws);
}

TEST(TestGenTest, RareSuiteScoresInBand) {
  const auto& net = corpus_pipeline().net;
  auto suite = generate_tests(net, kAdvice, Stratum::Rare, 50, 4);
  ASSERT_EQ(suite.cases.size(), 50u);
  EXPECT_EQ(suite.columns, (std::vector<std::string>{"param.Person.height", "param.Person.weight"}));
  auto arg = density::marginal(net.node(kAdvice).density, suite.columns);
  for (std::size_t i = 0; i < suite.cases.size(); ++i) {
    const auto& c = suite.cases[i];
    EXPECT_GT(c.score, 0.02);
    EXPECT_LT(c.score, 0.1);
    EXPECT_DOUBLE_EQ(density::quantile_score(arg, c.args), c.score);
    if (i < 10) EXPECT_NEAR(oracle_score(arg, c.args), c.score, 0.015);
  }
}

TEST(TestGenTest, TypicalSuiteScoresHigh) {
  auto suite = generate_tests(corpus_pipeline().net, kAdvice, Stratum::Typical, 30, 2);
  ASSERT_EQ(suite.cases.size(), 30u);
  for (const auto& c : suite.cases) {
    EXPECT_GE(c.score, 0.5);
    ASSERT_TRUE(c.expected.has_value());
    EXPECT_TRUE(std::holds_alternative<std::string>(c.expected->mode));
  }
}

TEST(TestGenTest, ImpossibleCasesLieOutsideObservedBox) {
  const auto& p = corpus_pipeline();
  auto suite = generate_tests(p.net, kAdvice, Stratum::Impossible, 40, 5);
  ASSERT_EQ(suite.cases.size(), 40u);
  const auto& rows = p.rows.at(kAdvice);
  std::vector<std::pair<double, double>> box;
  for (const auto& col : suite.columns) {
    auto xs = column(rows, col);
    box.emplace_back(*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()));
  }
  for (const auto& c : suite.cases) {
    EXPECT_LT(c.score, 0.001);
    bool outside = false;
    for (std::size_t j = 0; j < box.size(); ++j) {
      double x = as_double(c.args[j]);
      outside = outside || x < box[j].first || x > box[j].second;
    }
    EXPECT_TRUE(outside);
  }
}

TEST(TestGenTest, UnsatisfiableStratumReportsCount) {
  StrataConfig cfg;
  cfg.rare_lo = 0.05;
  cfg.rare_hi = 0.0500001;
  cfg.max_attempts = 2000;
  try {
    generate_tests(corpus_pipeline().net, kAdvice, Stratum::Rare, 50, 1, cfg);
    FAIL() << "expected StratumUnsatisfiable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StratumUnsatisfiable);
    EXPECT_NE(std::string(e.what()).find("of 50 cases"), std::string::npos);
  }
  StrataConfig inverted;
  inverted.rare_lo = 0.2;
  EXPECT_EQ(code_of([&] { generate_tests(corpus_pipeline().net, kAdvice, Stratum::Rare, 1, 1, inverted); }),
            ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([&] { generate_tests(corpus_pipeline().net, "Person", Stratum::Rare, 1, 1); }),
            ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([&] { stratum_from_name("odd"); }), ErrorCode::InvalidParams);
}

TEST(TestGenTest, EmittedDriversRunInTheInterpreter) {
  const auto& p = corpus_pipeline();
  StrataConfig cfg;
  cfg.with_expectations = false;
  for (Stratum s : {Stratum::Typical, Stratum::Rare, Stratum::Impossible}) {
    auto suite = generate_tests(p.net, kAdvice, s, 5, 8, cfg);
    std::string source = psm::testing::read_corpus("nutrition_advisor.ml0") + emit_ml0(suite, p.model);
    ml0::Program program = ml0::parse(source);
    auto model = structure::extract(program);
    for (std::size_t i = 0; i < suite.cases.size(); ++i) {
      ml0::ExecOptions opt;
      opt.entry = "test_" + std::string(stratum_name(s)) + "_" + std::to_string(i);
      trace::TraceLog log;
      ASSERT_NO_THROW(log = ml0::execute(program, opt)) << source;
      auto rows = trace::assemble(log, model);
      const auto& adv = rows.at(kAdvice).rows;
      ASSERT_EQ(adv.size(), 1u);
      for (std::size_t j = 0; j < suite.columns.size(); ++j) {
        EXPECT_EQ(as_double(adv[0].cells.at(suite.columns[j])), as_double(suite.cases[i].args[j]));
      }
    }
  }
}

TEST(TestGenTest, PointMassModelGivesThePoint) {
  auto p = run_pipeline("deterministic.ml0", 100, 2);
  auto suite = generate_tests(p.net, "Geometry.area", Stratum::Typical, 10, 3);
  ASSERT_EQ(suite.cases.size(), 10u);
  for (const auto& c : suite.cases) {
    EXPECT_NEAR(as_double(c.args[0]), 3.0, 1e-6);
    EXPECT_NEAR(as_double(c.args[1]), 4.0, 1e-6);
  }
}

TEST(TestGenTest, DeterministicAndSerializable) {
  const auto& net = corpus_pipeline().net;
  auto a = generate_tests(net, kAdvice, Stratum::Rare, 5, 21);
  auto b = generate_tests(net, kAdvice, Stratum::Rare, 5, 21);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  Json j = to_json(a);
  EXPECT_EQ(j["stratum"], "rare");
  EXPECT_EQ(j["cases"].size(), 5u);
  EXPECT_TRUE(generate_tests(net, kAdvice, Stratum::Rare, 0, 21).cases.empty());
}

// Simulation ------------------------------------------------------------------

double mean_of(const NodeSimulation& s, const std::string& var) {
  auto j = static_cast<std::size_t>(std::find(s.columns.begin(), s.columns.end(), var) - s.columns.begin());
  double sum = 0;
  for (const auto& r : s.rows) sum += as_double(r[j]);
  return sum / static_cast<double>(s.rows.size());
}

std::vector<double> sim_column(const NodeSimulation& s, const std::string& var) {
  auto j = static_cast<std::size_t>(std::find(s.columns.begin(), s.columns.end(), var) - s.columns.begin());
  std::vector<double> out;
  for (const auto& r : s.rows) out.push_back(as_double(r[j]));
  return out;
}

TEST(SimulateTest, OverriddenPersonGivesItsBmi) {
  SimulationConfig cfg;
  cfg.n = 2000;
  cfg.seed = 5;
  cfg.overrides = {density::Constraint::at("height", 168.59), density::Constraint::at("weight", 69.54)};
  auto r = simulate(corpus_pipeline().net, kAdvice, cfg);
  EXPECT_EQ(r.n, 2000u);
  const auto* bmi = r.find("BmiService.bmi");
  ASSERT_NE(bmi, nullptr);
  EXPECT_EQ(bmi->depth, 1);
  EXPECT_EQ(bmi->rows.size(), 2000u);
  const double expected = 69.54 / (1.6859 * 1.6859);
  EXPECT_NEAR(mean_of(*bmi, "return"), expected, 0.5);
  EXPECT_NEAR(mean_of(*bmi, "param.height"), 168.59, 1e-6);
  EXPECT_EQ(bmi->histograms.size(), bmi->columns.size());
  EXPECT_EQ(bmi->histograms[0].mass.size(), 256u);
}

TEST(SimulateTest, MatchesTracedBmiDistribution) {
  const auto& p = corpus_pipeline();
  SimulationConfig cfg;
  cfg.n = 5000;
  cfg.seed = 9;
  auto r = simulate(p.net, kAdvice, cfg);
  const auto* bmi = r.find("BmiService.bmi");
  ASSERT_NE(bmi, nullptr);
  double js = binned_js(sim_column(*bmi, "return"), column(p.rows.at("BmiService.bmi"), "return"));
  EXPECT_LT(js, 0.1);
  EXPECT_EQ(r.failed, 0u);
}

TEST(SimulateTest, DeterministicProgramReproducesTrace) {
  auto p = run_pipeline("deterministic.ml0", 200, 3);
  SimulationConfig cfg;
  cfg.n = 50;
  auto r = simulate(p.net, "Geometry.describe", cfg);
  const auto* area = r.find("Geometry.area");
  ASSERT_NE(area, nullptr);
  for (double x : sim_column(*area, "return")) EXPECT_NEAR(x, 12.0, 1e-6);
  for (double x : sim_column(*r.find("Geometry.describe"), "return")) EXPECT_NEAR(x, 12.0, 1e-6);
}

TEST(SimulateTest, RecursionIsCappedAtDepth) {
  auto p = run_pipeline("recursion.ml0", 500, 3);
  SimulationConfig cfg;
  cfg.n = 20;
  auto r = simulate(p.net, "MathService.factorial", cfg);
  EXPECT_TRUE(r.truncated);
  ASSERT_EQ(r.nodes.size(), 1u);
  EXPECT_EQ(r.nodes[0].rows.size(), 20u * 17u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(SimulateTest, EmptyRunAndErrors) {
  const auto& net = corpus_pipeline().net;
  SimulationConfig cfg;
  cfg.n = 0;
  auto r = simulate(net, kAdvice, cfg);
  EXPECT_EQ(r.n, 0u);
  ASSERT_EQ(r.nodes.size(), 1u);
  EXPECT_TRUE(r.nodes[0].rows.empty());
  EXPECT_EQ(to_json(r)["runs"], 0);
  cfg.n = 10;
  cfg.overrides = {density::Constraint::at("age", 3.0)};
  EXPECT_EQ(code_of([&] { simulate(net, kAdvice, cfg); }), ErrorCode::UnknownVariable);
  cfg.overrides = {density::Constraint::at("weight", -1e6)};
  EXPECT_EQ(code_of([&] { simulate(net, kAdvice, cfg); }), ErrorCode::ZeroProbabilityCondition);
  cfg.overrides = {};
  EXPECT_EQ(code_of([&] { simulate(net, "Person", cfg); }), ErrorCode::InvalidParams);
  cfg.max_depth = 0;
  EXPECT_EQ(code_of([&] { simulate(net, kAdvice, cfg); }), ErrorCode::InvalidParams);
}

TEST(SimulateTest, SameSeedSameResult) {
  SimulationConfig cfg;
  cfg.n = 200;
  cfg.seed = 17;
  auto a = simulate(corpus_pipeline().net, kAdvice, cfg);
  auto b = simulate(corpus_pipeline().net, kAdvice, cfg);
  EXPECT_EQ(to_json(a, true).dump(), to_json(b, true).dump());
}

// Comparison --------------------------------------------------------------------

TEST(CompareTest, NetworkAgainstItselfIsCompatible) {
  const auto& net = corpus_pipeline().net;
  auto r = compare(net, net);
  EXPECT_EQ(r.overall, Verdict::Compatible);
  EXPECT_TRUE(r.removed.empty());
  for (const auto& e : r.entries) EXPECT_LT(e.divergence, 0.01) << e.node;
}

TEST(CompareTest, HeavierWorkloadIsFlagged) {
  auto r = compare(corpus_pipeline().net, v2_pipeline().net);
  EXPECT_EQ(r.overall, Verdict::Divergent);
  std::map<std::string, double> by_node;
  for (const auto& e : r.entries) by_node[e.node] = e.divergence;
  EXPECT_GT(by_node.at("Person"), 0.2);
  EXPECT_GT(by_node.at("Person.weight"), 0.2);
  EXPECT_LT(by_node.at("Person.height"), 0.05);
  for (std::size_t i = 1; i < r.entries.size(); ++i) EXPECT_GE(r.entries[i - 1].divergence, r.entries[i].divergence);
}

// JS divergence in bits between two lognormal weight generators, the second
// shifted, by trapezoid quadrature.
double shifted_lognormal_js(double mu, double sigma, double shift) {
  auto pdf = [&](double x) {
    if (x <= 0) return 0.0;
    double z = (std::log(x) - mu) / sigma;
    return std::exp(-0.5 * z * z) / (x * sigma * std::sqrt(2 * M_PI));
  };
  const int steps = 200000;
  const double lo = 1e-6, hi = 400, h = (hi - lo) / steps;
  double js = 0;
  for (int i = 0; i <= steps; ++i) {
    double x = lo + i * h;
    double p = pdf(x), q = pdf(x - shift), m = 0.5 * (p + q), t = 0;
    if (p > 0) t += 0.5 * p * std::log2(p / m);
    if (q > 0) t += 0.5 * q * std::log2(q / m);
    js += (i == 0 || i == steps ? 0.5 : 1.0) * t * h;
  }
  return js;
}

TEST(CompareTest, WeightShiftMatchesQuadrature) {
  double oracle = shifted_lognormal_js(std::log(70.0), 0.15, 20.0);
  auto r = compare(corpus_pipeline().net, v2_pipeline().net);
  for (const auto& e : r.entries) {
    if (e.node == "Person" || e.node == "Person.weight") EXPECT_NEAR(e.divergence, oracle, 0.03) << e.node;
  }
}

TEST(CompareTest, MetersAgainstCentimetersIsDivergent) {
  CompareConfig cfg;
  cfg.mode = CompareMode::Compatibility;
  auto r = compare(meters_pipeline().net, corpus_pipeline().net, cfg);
  ASSERT_EQ(r.entries.size(), 1u);
  const auto& e = r.entries[0];
  EXPECT_EQ(e.node, kAdvice);
  EXPECT_EQ(e.other_node, "BmiService.bmi");
  EXPECT_EQ(e.variables, (std::vector<std::string>{"param.height", "param.weight"}));
  EXPECT_GT(e.divergence, 0.9);
  EXPECT_EQ(e.verdict, Verdict::Divergent);
}

TEST(CompareTest, CallerMatchesItsOwnCallee) {
  CompareConfig cfg;
  cfg.mode = CompareMode::Compatibility;
  auto r = compare(corpus_pipeline().net, corpus_pipeline().net, cfg);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_LT(r.entries[0].divergence, 0.05);
  EXPECT_EQ(r.entries[0].verdict, Verdict::Compatible);
}

TEST(CompareTest, DisjointNetworksHaveNoOverlap) {
  auto other = run_pipeline("deterministic.ml0", 50, 1);
  EXPECT_EQ(code_of([&] { compare(corpus_pipeline().net, other.net); }), ErrorCode::NoOverlap);
  CompareConfig bad;
  bad.compatible_below = 0.3;
  EXPECT_EQ(code_of([&] { compare(other.net, other.net, bad); }), ErrorCode::InvalidParams);
}

TEST(CompareTest, VerdictThresholds) {
  CompareConfig cfg;
  EXPECT_EQ(cfg.verdict(0.0), Verdict::Compatible);
  EXPECT_EQ(cfg.verdict(0.049), Verdict::Compatible);
  EXPECT_EQ(cfg.verdict(0.05), Verdict::Warning);
  EXPECT_EQ(cfg.verdict(0.199), Verdict::Warning);
  EXPECT_EQ(cfg.verdict(0.2), Verdict::Divergent);
  EXPECT_EQ(cfg.verdict(1.0), Verdict::Divergent);
}

}  // namespace
}  // namespace psm::apps
