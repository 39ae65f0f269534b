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

#include "psm/network/network.hpp"

#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "pipeline_util.hpp"
#include "psm/core/error.hpp"

namespace psm::network {
namespace {

using psm::testing::corpus_pipeline;
using psm::testing::read_corpus;
using psm::testing::run_pipeline;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

structure::StaticModel corpus_model(const std::string& file) { return structure::extract(ml0::parse(read_corpus(file))); }

std::set<std::string> names(const ModelNode& n) {
  std::set<std::string> out;
  for (const auto& v : n.variables) out.insert(v.name);
  return out;
}

double js_bits(const std::vector<double>& p, const std::vector<double>& q) {
  double js = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return js;
}

TEST(BuildTest, NutritionAdvisorNodes) {
  ModelNetwork net = build(corpus_model("nutrition_advisor.ml0"));
  std::set<std::string> ids;
  for (const auto& [id, n] : net.nodes()) ids.insert(id);
  EXPECT_EQ(ids, (std::set<std::string>{"BmiService", "BmiService.bmi", "NutritionAdvisor", "NutritionAdvisor.advice",
                                        "NutritionAdvisor.bmiService", "Person", "Person.height", "Person.weight"}));
  EXPECT_EQ(names(net.node("NutritionAdvisor.advice")),
            (std::set<std::string>{"param.Person.height", "param.Person.weight", "read.Person.height",
                                   "read.Person.weight", "call0.bmi.ret", "return"}));
  EXPECT_EQ(names(net.node("BmiService.bmi")), (std::set<std::string>{"param.height", "param.weight", "return"}));
  EXPECT_EQ(names(net.node("Person")), (std::set<std::string>{"height", "weight"}));
  EXPECT_TRUE(net.node("NutritionAdvisor").variables.empty());
  EXPECT_TRUE(net.node("NutritionAdvisor.bmiService").variables.empty());
  EXPECT_EQ(net.node("Person.weight").kind, NodeKind::Property);
  EXPECT_EQ(code_of([&] { net.node("main"); }), ErrorCode::UnknownNode);
}

TEST(BuildTest, MirrorsInUniverseElements) {
  for (const char* file : {"nutrition_advisor.ml0", "branching.ml0", "recursion.ml0", "deterministic.ml0"}) {
    auto model = corpus_model(file);
    std::size_t elements = 0;
    for (const auto& t : model.types) {
      if (t.external || !model.in_universe(t.id)) continue;
      elements += 1 + t.properties.size();
    }
    for (const auto& e : model.executables) elements += (!e.driver && model.executable_in_universe(e)) ? 1 : 0;
    EXPECT_EQ(build(model).nodes().size(), elements) << file;
  }
}

TEST(BuildTest, EmptyModelGivesEmptyNetwork) {
  EXPECT_TRUE(build(structure::StaticModel{}).empty());
}

TEST(BuildTest, UniverseFilterDropsNodes) {
  auto model = structure::universe_filter(corpus_model("nutrition_advisor.ml0"), {"Person"});
  ModelNetwork net = build(model);
  EXPECT_EQ(net.nodes().size(), 3u);
  EXPECT_NE(net.find("Person.weight"), nullptr);
}

TEST(FitAllTest, CorpusNodesFitted) {
  const auto& p = corpus_pipeline();
  const auto& person = p.net.fitted_node("Person", false);
  EXPECT_EQ(person.samples, 10000u);
  EXPECT_FALSE(person.low_confidence);
  EXPECT_EQ(p.net.report().entries.size(), p.net.nodes().size());
  for (const auto& e : p.net.report().entries) {
    EXPECT_TRUE(e.fitted) << e.node;
    EXPECT_TRUE(e.converged) << e.node;
  }
  EXPECT_TRUE(p.net.node("NutritionAdvisor").density.empty());
  EXPECT_TRUE(p.net.node("BmiService").density.empty());
}

TEST(FitAllTest, WeightMarginalReproducesTraceHistogram) {
  const auto& p = corpus_pipeline();
  const auto& person = p.net.node("Person");
  std::vector<double> ws;
  for (const auto& r : p.rows.at("Person").rows) ws.push_back(as_double(r.cells.at("weight")));
  Histogram h = numeric_histogram("weight", ws);
  std::vector<double> fitted;
  for (std::size_t b = 0; b < h.mass.size(); ++b) {
    double lo = b == 0 ? -density::kInf : h.lo + b * h.width();
    double hi = b + 1 == h.mass.size() ? density::kInf : h.lo + (b + 1) * h.width();
    fitted.push_back(density::interval_probability(person.density, "weight", density::Interval::open(lo, hi)));
  }
  EXPECT_LT(js_bits(h.mass, fitted), 0.05);
  // stored observation summary is the same histogram
  ASSERT_EQ(person.observed.size(), 2u);
  EXPECT_EQ(person.observed[1], h);
}

TEST(FitAllTest, TypeMarginalMatchesPropertyNode) {
  const auto& p = corpus_pipeline();
  for (const char* prop : {"height", "weight"}) {
    auto type_marginal = density::marginal(p.net.node("Person").density, {prop});
    const auto& own = p.net.node(std::string("Person.") + prop).density;
    EXPECT_LT(density::divergence(type_marginal, own), 0.02) << prop;
  }
}

TEST(FitAllTest, ExecutableRowsConserveFrames) {
  const auto& p = corpus_pipeline();
  auto assembly = trace::assemble_frames(p.log, p.model);
  std::size_t completed = 0;
  for (const auto& f : assembly.frames) {
    const ModelNode* n = p.net.find(f.exec_id);
    if (n && n->kind == NodeKind::Executable && !f.aborted) ++completed;
  }
  std::size_t rows = 0;
  for (const auto& [id, n] : p.net.nodes()) {
    if (n.kind == NodeKind::Executable) rows += n.samples;
  }
  EXPECT_EQ(rows, completed);
  EXPECT_EQ(rows, 20000u);
}

TEST(FitAllTest, MissingRowsLeaveNodeUnfitted) {
  auto p = run_pipeline("nutrition_advisor.ml0", 50, 3);
  trace::RowsByNode rows = p.rows;
  rows.erase("BmiService.bmi");
  ModelNetwork net = build(p.model);
  auto report = fit_all(net, rows, {}, 3);
  const auto& bmi = net.node("BmiService.bmi");
  EXPECT_FALSE(bmi.fitted);
  EXPECT_TRUE(bmi.low_confidence);
  EXPECT_EQ(code_of([&] { net.fitted_node("BmiService.bmi"); }), ErrorCode::UnfittedNode);
  bool reported = false;
  for (const auto& e : report.entries) {
    if (e.node == "BmiService.bmi") reported = !e.fitted && !e.warnings.empty();
  }
  EXPECT_TRUE(reported);
}

TEST(FitAllTest, SmallSamplesAreLowConfidence) {
  auto p = run_pipeline("nutrition_advisor.ml0", 10, 3);
  const auto& person = p.net.node("Person");
  EXPECT_TRUE(person.fitted);
  EXPECT_TRUE(person.low_confidence);
  EXPECT_NO_THROW(p.net.fitted_node("Person"));
  EXPECT_EQ(code_of([&] { p.net.fitted_node("Person", false); }), ErrorCode::UnfittedNode);
}

TEST(FitAllTest, UnknownVariablesAreSchemaMismatch) {
  auto p = run_pipeline("nutrition_advisor.ml0", 40, 3);
  ModelNetwork net = build(p.model);
  trace::RowsByNode bad = p.rows;
  bad["Person"].rows[0].cells["age"] = Scalar{std::int64_t{3}};
  EXPECT_EQ(code_of([&] { fit_all(net, bad, {}, 1); }), ErrorCode::SchemaMismatch);
  trace::RowsByNode stray = p.rows;
  stray["Ghost.x"].rows.push_back({});
  EXPECT_EQ(code_of([&] { fit_all(net, stray, {}, 1); }), ErrorCode::SchemaMismatch);
}

TEST(FitAllTest, DeterministicAndOrderIndependent) {
  auto a = run_pipeline("nutrition_advisor.ml0", 500, 11);
  ModelNetwork b = build(a.model);
  fit_all(b, a.rows, {}, 11);
  EXPECT_EQ(to_json(a.net).dump(), to_json(b).dump());
  // refitting a subset gives the same density for the kept node
  trace::RowsByNode only;
  only["Person"] = a.rows.at("Person");
  ModelNetwork net = build(a.model);
  fit_all(net, only, {}, 11);
  EXPECT_EQ(net.node("Person").density, a.net.node("Person").density);
}

TEST(FitAllTest, NetworkJsonRoundTrip) {
  auto p = run_pipeline("nutrition_advisor.ml0", 300, 5);
  std::string text = to_json(p.net).dump();
  ModelNetwork back = network_from_json(Json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  Json broken = Json::parse(text);
  broken["nodes"].erase(0);
  EXPECT_EQ(code_of([&] { network_from_json(broken); }), ErrorCode::SchemaMismatch);
}

TEST(DownstreamTest, CallEdgesInDepthOrder) {
  ModelNetwork net = build(corpus_model("nutrition_advisor.ml0"));
  EXPECT_EQ(downstream(net, "NutritionAdvisor.advice"), (std::vector<DownstreamEntry>{{"BmiService.bmi", 1, false}}));
  EXPECT_TRUE(downstream(net, "BmiService.bmi").empty());
  EXPECT_TRUE(downstream(net, "Person").empty());
  EXPECT_EQ(code_of([&] { downstream(net, "Nope"); }), ErrorCode::UnknownNode);
}

TEST(DownstreamTest, RecursionIsMarkedCyclic) {
  ModelNetwork net = build(corpus_model("recursion.ml0"));
  EXPECT_EQ(downstream(net, "MathService.factorial"),
            (std::vector<DownstreamEntry>{{"MathService.factorial", 1, true}}));
}

TEST(HistogramTest, MassAndEdges) {
  Histogram h = numeric_histogram("x", {0.0, 1.0, 2.0, 3.0}, 0.0, 4.0, 4);
  EXPECT_EQ(h.mass, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  Histogram clamp = numeric_histogram("x", {-5.0, 9.0}, 0.0, 4.0, 4);
  EXPECT_EQ(clamp.mass, (std::vector<double>{0.5, 0, 0, 0.5}));
  Histogram one = numeric_histogram("x", {2.0, 2.0});
  EXPECT_LT(one.lo, 2.0);
  EXPECT_GT(one.hi, 2.0);
  EXPECT_EQ(one.mass.size(), static_cast<std::size_t>(kHistogramBins));
  Histogram c = categorical_histogram("s", {Scalar{std::string("b")}, Scalar{std::string("a")}, Scalar{std::string("b")},
                                            Scalar{}});
  EXPECT_EQ(c.count, 3u);
  EXPECT_EQ(c.values, (std::vector<Scalar>{Scalar{std::string("a")}, Scalar{std::string("b")}}));
  EXPECT_DOUBLE_EQ(c.mass[1], 2.0 / 3.0);
  EXPECT_EQ(histogram_from_json(to_json(c)), c);
  EXPECT_EQ(histogram_from_json(to_json(h)), h);
}

}  // namespace
}  // namespace psm::network
