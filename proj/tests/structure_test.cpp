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
#include <fstream>
#include <set>
#include <tuple>

#include "gtest/gtest.h"
#include "psm/core/error.hpp"
#include "psm/minilang/parser.hpp"
#include "psm/structure/static_model.hpp"
#include "psm/structure/variables.hpp"
#include "test_util.hpp"

namespace psm::structure {
namespace {

using ::psm::testing::read_corpus;

StaticModel corpus_model() { return extract(ml0::parse(read_corpus("nutrition_advisor.ml0"))); }

TEST(ExtractTest, AdviceDependencies) {
  StaticModel m = corpus_model();
  const ExecutableInfo* advice = m.find_executable("NutritionAdvisor.advice");
  ASSERT_NE(advice, nullptr);
  EXPECT_EQ(advice->reads, (std::set<std::string>{"Person.height", "Person.weight"}));
  EXPECT_EQ(advice->structural_reads, (std::set<std::string>{"NutritionAdvisor.bmiService"}));
  ASSERT_EQ(advice->invokes.size(), 1u);
  EXPECT_EQ(advice->invokes[0].callee, "BmiService.bmi");
  EXPECT_EQ(advice->invokes[0].site, 0);
  ASSERT_EQ(advice->params.size(), 1u);
  EXPECT_EQ(advice->params[0].kind.ref_type, "Person");
  EXPECT_FALSE(advice->external);
}

TEST(ExtractTest, StatelessTypeHasEmptyPropertyList) {
  StaticModel m = corpus_model();
  const TypeInfo* svc = m.find_type("BmiService");
  ASSERT_NE(svc, nullptr);
  EXPECT_TRUE(svc->properties.empty());
  const PropertyInfo* p = m.find_property("NutritionAdvisor.bmiService");
  ASSERT_NE(p, nullptr);
  EXPECT_FALSE(p->modelable());
  EXPECT_TRUE(m.find_property("Person.weight")->modelable());
}

TEST(ExtractTest, EmptyMethodHasNoDependencies) {
  StaticModel m = extract(ml0::parse("class A { def noop() {} }\ndriver main() {}\n"));
  const ExecutableInfo* e = m.find_executable("A.noop");
  ASSERT_NE(e, nullptr);
  EXPECT_TRUE(e->params.empty());
  EXPECT_TRUE(e->reads.empty());
  EXPECT_TRUE(e->structural_reads.empty());
  EXPECT_TRUE(e->writes.empty());
  EXPECT_TRUE(e->invokes.empty());
  EXPECT_FALSE(e->returns.has_value());
}

TEST(ExtractTest, DriversAreExternal) {
  StaticModel m = corpus_model();
  const ExecutableInfo* main = m.find_executable("main");
  ASSERT_NE(main, nullptr);
  EXPECT_TRUE(main->external);
  EXPECT_TRUE(main->driver);
  EXPECT_FALSE(m.executable_in_universe(*main));
}

TEST(ExtractTest, ChainedReadsRecordTheChain) {
  StaticModel m = extract(ml0::parse(
      "class Addr { var zip: int; }\nclass P { var addr: Addr; }\n"
      "class S { def f(p: P): int { return p.addr.zip; } }\ndriver main() {}\n"));
  const ExecutableInfo* f = m.find_executable("S.f");
  EXPECT_EQ(f->reads, (std::set<std::string>{"Addr.zip"}));
  EXPECT_EQ(f->structural_reads, (std::set<std::string>{"P.addr"}));
  ASSERT_EQ(f->read_chains.size(), 1u);
  EXPECT_EQ(f->read_chains[0], (std::vector<std::string>{"P.addr", "Addr.zip"}));
}

TEST(ExtractTest, OrderInsensitiveAndIdempotent) {
  std::string a = "class A { var x: float; }\nclass B { def f(a: A): float { return a.x; } }\ndriver main() {}\n";
  std::string b = "class B { def f(a: A): float { return a.x; } }\nclass A { var x: float; }\ndriver main() {}\n";
  StaticModel ma = extract(ml0::parse(a));
  StaticModel mb = extract(ml0::parse(b));
  EXPECT_EQ(to_json(ma).dump(), to_json(mb).dump());
  EXPECT_EQ(ma, extract(ml0::parse(a)));
}

TEST(ExtractTest, JsonRoundTrip) {
  StaticModel m = corpus_model();
  EXPECT_EQ(static_model_from_json(to_json(m)), m);
  StaticModel filtered = universe_filter(m, {"Person"});
  EXPECT_EQ(static_model_from_json(to_json(filtered)), filtered);
}

TEST(ExtractTest, MatchesGoldenFile) {
  std::ifstream in(std::string(PSM_TEST_DATA_DIR) + "/nutrition_advisor.static.json");
  ASSERT_TRUE(in.good());
  Json golden = Json::parse(in);
  EXPECT_EQ(to_json(corpus_model()), golden);
}

TEST(UniverseTest, StarKeepsAllTypes) {
  StaticModel m = universe_filter(corpus_model(), {"*"});
  EXPECT_EQ(m.universe, (std::set<std::string>{"BmiService", "NutritionAdvisor", "Person"}));
}

TEST(UniverseTest, PersonOnlyMarksOtherEndpointsLatent) {
  StaticModel full = corpus_model();
  StaticModel m = universe_filter(full, {"Person"});
  EXPECT_EQ(m.universe, (std::set<std::string>{"Person"}));

  // Oracle: enumerate the edges of the full model and keep those touching
  // Person, marking everything else latent.
  auto touches_person = [](const std::string& id) { return id == "Person" || id.rfind("Person.", 0) == 0; };
  std::set<std::tuple<std::string, std::string, bool, bool>> expected;
  for (const auto& e : full.edges) {
    bool fl = !touches_person(e.from);
    bool tl = !touches_person(e.to);
    if (fl && tl) continue;
    expected.emplace(e.from, e.to, fl, tl);
  }
  std::set<std::tuple<std::string, std::string, bool, bool>> actual;
  for (const auto& e : m.edges) actual.emplace(e.from, e.to, e.from_latent, e.to_latent);
  EXPECT_EQ(actual, expected);

  EXPECT_TRUE(actual.count({"NutritionAdvisor.advice", "Person.height", true, false}));
  EXPECT_TRUE(actual.count({"NutritionAdvisor.advice", "Person", true, false}));
  EXPECT_FALSE(actual.count({"NutritionAdvisor.advice", "BmiService.bmi", true, true}));
}

TEST(UniverseTest, NoMatchIsEmptyUniverse) {
  try {
    universe_filter(corpus_model(), {"Nope*"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyUniverse);
  }
}

TEST(GlobTest, Wildcards) {
  EXPECT_TRUE(glob_match("*", "Person"));
  EXPECT_TRUE(glob_match("P?rson", "Person"));
  EXPECT_TRUE(glob_match("*Advisor", "NutritionAdvisor"));
  EXPECT_FALSE(glob_match("Per", "Person"));
  EXPECT_TRUE(glob_match("B*S*e", "BmiService"));
}

TEST(VariablesTest, AdviceVariableSet) {
  StaticModel m = corpus_model();
  std::vector<std::string> names;
  for (const auto& v : executable_variables(m, *m.find_executable("NutritionAdvisor.advice"))) names.push_back(v.name);
  EXPECT_EQ(names, (std::vector<std::string>{"param.Person.height", "param.Person.weight", "read.Person.height",
                                             "read.Person.weight", "call0.bmi.ret", "return"}));
}

TEST(VariablesTest, SameTypeParametersUseParameterNames) {
  StaticModel m = extract(ml0::parse("class A { var x: float; }\n"
                                     "class S { def f(a: A, b: A, k: int) {} }\ndriver main() {}\n"));
  std::vector<std::string> names;
  for (const auto& v : executable_variables(m, *m.find_executable("S.f"))) names.push_back(v.name);
  EXPECT_EQ(names, (std::vector<std::string>{"param.a.x", "param.b.x", "param.k"}));
}

}  // namespace
}  // namespace psm::structure
