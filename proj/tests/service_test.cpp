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

#include <filesystem>
#include <sstream>
#include <thread>

#include "pipeline_util.hpp"
#include "psm/service/api.hpp"
#include "psm/service/bundle.hpp"
#include "psm/service/cli.hpp"
#include "psm/trace/log_io.hpp"

// After Eigen: the resolver header it pulls in defines _res.
#include <httplib.h>

namespace psm::service {
namespace {

namespace fs = std::filesystem;
using psm::testing::corpus_pipeline;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::path(PSM_TEST_CACHE_DIR) / "service" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "psm");
  std::ostringstream out, err;
  int rc = run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

Bundle corpus_bundle() {
  Bundle b;
  b.net = corpus_pipeline().net;
  b.provenance.model_hash = "m";
  b.provenance.trace_hash = "t";
  b.provenance.seed = 7;
  return b;
}

const fs::path& corpus_bundle_file() {
  static const fs::path p = [] {
    fs::path dir = scratch("bundle");
    save_bundle(dir / "corpus.psm", corpus_bundle());
    return dir / "corpus.psm";
  }();
  return p;
}

const Api& corpus_api() {
  static const Api api(load_bundle(corpus_bundle_file()), 42);
  return api;
}

ApiResponse get(const std::string& path, std::map<std::string, std::string> params = {}) {
  return corpus_api().handle({"GET", path, std::move(params), ""});
}

ApiResponse post(const std::string& path, const Json& body) {
  return corpus_api().handle({"POST", path, {}, body.dump()});
}

// Bundle -------------------------------------------------------------------------

TEST(BundleTest, SaveLoadIsByteIdentical) {
  fs::path dir = scratch("roundtrip");
  save_bundle(dir / "a.psm", corpus_bundle());
  Bundle back = load_bundle(dir / "a.psm");
  save_bundle(dir / "b.psm", back);
  EXPECT_EQ(slurp(dir / "a.psm"), slurp(dir / "b.psm"));
  EXPECT_EQ(back.net.node("Person").density, corpus_pipeline().net.node("Person").density);
  EXPECT_EQ(back.provenance, corpus_bundle().provenance);
  EXPECT_EQ(back.hash(), corpus_bundle().hash());
}

TEST(BundleTest, RejectsOtherVersionsAndFormats) {
  Json j = to_json(corpus_bundle());
  j["manifest"]["version"] = 99;
  try {
    bundle_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BundleVersion);
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { bundle_from_json(Json{{"x", 1}}); }), ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([] { load_bundle("/nonexistent/b.psm"); }), ErrorCode::IoError);
  fs::path dir = scratch("garbage");
  std::ofstream(dir / "g.psm") << "not json";
  EXPECT_EQ(code_of([&] { load_bundle(dir / "g.psm"); }), ErrorCode::SchemaMismatch);
}

// CLI ----------------------------------------------------------------------------

TEST(CliTest, ParsesAssignments) {
  EXPECT_EQ(parse_literal("3"), Scalar{std::int64_t{3}});
  EXPECT_EQ(parse_literal("-10.5"), Scalar{-10.5});
  EXPECT_EQ(parse_literal("true"), Scalar{true});
  EXPECT_EQ(parse_literal("\"obese\""), Scalar{std::string("obese")});
  EXPECT_EQ(parse_literal("normal"), Scalar{std::string("normal")});
  auto p = parse_assignment("weight=69.54");
  EXPECT_EQ(p.variable, "weight");
  EXPECT_EQ(*p.point, Scalar{69.54});
  auto iv = parse_assignment("height=(169,170]");
  EXPECT_FALSE(iv.point);
  EXPECT_EQ(iv.interval, (density::Interval{169, 170, false, true}));
  EXPECT_EQ(parse_assignment("h=[-inf,3)").interval.lo, -density::kInf);
  EXPECT_EQ(code_of([] { parse_assignment("weight"); }), ErrorCode::UsageError);
  EXPECT_EQ(code_of([] { parse_assignment("w=[a,b]"); }), ErrorCode::UsageError);
}

TEST(CliTest, FullPipelineAnswersQueries) {
  fs::path dir = scratch("pipeline");
  std::string src = psm::testing::corpus_path("nutrition_advisor.ml0");
  ASSERT_EQ(cli({"analyze", src, "-o", (dir / "static.json").string()}).code, 0);
  ASSERT_EQ(cli({"run", src, "--seed", "7", "--iterations", "10000", "-o", (dir / "trace.jsonl").string()}).code, 0);
  auto fit = cli({"fit", (dir / "static.json").string(), (dir / "trace.jsonl").string(), "-o",
                  (dir / "b.psm").string(), "--seed", "7"});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.out.find("Person.weight"), std::string::npos);
  auto q = cli({"query", (dir / "b.psm").string(), "P(Person.weight > 80)", "--plot", (dir / "w.svg").string()});
  ASSERT_EQ(q.code, 0) << q.err;
  double p = Json::parse(q.out)["value"].get<double>();
  auto log = trace::read_log_file(dir / "trace.jsonl");
  auto rows = trace::assemble(log, structure::extract(ml0::parse(psm::testing::read_corpus("nutrition_advisor.ml0"))));
  double above = 0;
  for (const auto& r : rows.at("Person").rows) above += as_double(r.cells.at("weight")) > 80;
  EXPECT_NEAR(p, above / static_cast<double>(rows.at("Person").rows.size()), 0.02);
  std::string svg = slurp(dir / "w.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<rect"), std::string::npos);
}

TEST(CliTest, PipelineIsDeterministic) {
  std::string src = psm::testing::corpus_path("nutrition_advisor.ml0");
  std::vector<std::string> outputs;
  for (const char* name : {"det_a", "det_b"}) {
    fs::path dir = scratch(name);
    ASSERT_EQ(cli({"analyze", src, "-o", (dir / "s.json").string()}).code, 0);
    ASSERT_EQ(cli({"run", src, "--seed", "3", "--iterations", "1500", "-o", (dir / "t.jsonl").string()}).code, 0);
    ASSERT_EQ(cli({"fit", (dir / "s.json").string(), (dir / "t.jsonl").string(), "-o", (dir / "b.psm").string(),
                   "--seed", "3"}).code, 0);
    auto q = cli({"query", (dir / "b.psm").string(), "DIST(Person.weight | 169 < Person.height < 170)", "--seed", "9"});
    ASSERT_EQ(q.code, 0);
    outputs.push_back(slurp(dir / "s.json") + slurp(dir / "t.jsonl") + slurp(dir / "b.psm") + q.out);
  }
  EXPECT_EQ(outputs[0], outputs[1]);
}

TEST(CliTest, EmptyTraceIsNoData) {
  fs::path dir = scratch("empty");
  std::string src = psm::testing::corpus_path("nutrition_advisor.ml0");
  ASSERT_EQ(cli({"analyze", src, "-o", (dir / "s.json").string()}).code, 0);
  std::ofstream(dir / "t.jsonl").close();
  auto r = cli({"--json", "fit", (dir / "s.json").string(), (dir / "t.jsonl").string(), "-o", (dir / "b.psm").string()});
  EXPECT_EQ(r.code, 2);
  Json err = Json::parse(r.err);
  EXPECT_EQ(err["error"], "NoData");
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_FALSE(fs::exists(dir / "b.psm"));
}

TEST(CliTest, DiffOfBundleWithItselfIsCompatible) {
  std::string b = corpus_bundle_file().string();
  auto r = cli({"diff", b, b});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = Json::parse(r.out);
  EXPECT_EQ(j["overall"], "compatible");
  for (const auto& e : j["entries"]) EXPECT_LT(e["divergence"].get<double>(), 0.01);
}

TEST(CliTest, ExitCodes) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"bogus"}).code, 1);
  EXPECT_EQ(cli({"query"}).code, 1);
  auto usage = cli({"--json", "query"});
  EXPECT_EQ(usage.code, 1);
  EXPECT_EQ(Json::parse(usage.err)["error"], "UsageError");
  std::string b = corpus_bundle_file().string();
  auto bad = cli({"query", b, "P(Person.weight >> 80)", "--json"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(Json::parse(bad.err)["error"], "QuerySyntaxError");
  EXPECT_EQ(cli({"query", "/nonexistent.psm", "P(Person.weight > 1)"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(CliTest, GentestEmitsRunnableDrivers) {
  fs::path dir = scratch("gentest");
  auto r = cli({"gentest", corpus_bundle_file().string(), "--target", "NutritionAdvisor.advice", "--stratum", "rare",
                "-n", "5", "-o", (dir / "suite.json").string(), "--emit-ml0", (dir / "ml0").string(), "--program",
                psm::testing::corpus_path("nutrition_advisor.ml0")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(slurp(dir / "suite.json"))["cases"].size(), 5u);
  fs::path drivers = dir / "ml0" / "NutritionAdvisor_advice_rare.ml0";
  ASSERT_TRUE(fs::exists(drivers));
  auto run = cli({"run", drivers.string(), "--entry", "test_rare_4", "-o", (dir / "t.jsonl").string()});
  EXPECT_EQ(run.code, 0) << run.err;
}

// API ----------------------------------------------------------------------------

TEST(ApiTest, NetworkListsNodesAndEdges) {
  auto r = get("/api/network");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["nodes"].size(), corpus_pipeline().net.nodes().size());
  bool call = false;
  for (const auto& e : r.body["edges"]) {
    call = call || (e["kind"] == "call" && e["from"] == "NutritionAdvisor.advice" && e["to"] == "BmiService.bmi");
  }
  EXPECT_TRUE(call);
  EXPECT_EQ(r.body["meta"]["bundle"], corpus_api().hash());
}

TEST(ApiTest, NodeHistogramAndOverlayHaveEqualLength) {
  auto r = get("/api/node/Person");
  ASSERT_EQ(r.status, 200);
  for (const auto& v : r.body["variables"]) {
    ASSERT_EQ(v["histogram"]["mass"].size(), 256u);
    ASSERT_EQ(v["fitted"]["mass"].size(), 256u);
    ASSERT_EQ(v["fitted"]["density"].size(), 256u);
    double obs = 0, fit = 0;
    for (const auto& m : v["histogram"]["mass"]) obs += m.get<double>();
    for (const auto& m : v["fitted"]["mass"]) fit += m.get<double>();
    EXPECT_NEAR(obs, 1.0, 1e-9);
    EXPECT_NEAR(fit, 1.0, 0.01);
  }
  auto adv = get("/api/node/NutritionAdvisor.advice");
  ASSERT_EQ(adv.status, 200);
  for (const auto& v : adv.body["variables"]) {
    if (v["name"] == "return") EXPECT_EQ(v["fitted"]["mass"].size(), v["histogram"]["values"].size());
  }
}

TEST(ApiTest, ErrorStatuses) {
  EXPECT_EQ(get("/api/node/Nope").status, 404);
  EXPECT_EQ(get("/api/elsewhere").status, 404);
  EXPECT_EQ(corpus_api().handle({"POST", "/api/query", {}, "{not json"}).status, 400);
  EXPECT_EQ(post("/api/query", {{"query", "P(Person.weight >> 1)"}}).status, 400);
  EXPECT_EQ(get("/api/query").status, 400);
  auto zero = post("/api/query", {{"query", "P(Person.weight > 80 | Person.height = -100000)"}});
  EXPECT_EQ(zero.status, 422);
  EXPECT_EQ(zero.body["error"], "ZeroProbabilityCondition");
  EXPECT_EQ(get("/api/compare").status, 400);

  auto p = psm::testing::run_pipeline("nutrition_advisor.ml0", 50, 3);
  auto rows = p.rows;
  rows.erase("BmiService.bmi");
  Bundle b;
  b.net = network::build(p.model);
  network::fit_all(b.net, rows, {}, 3);
  Api api(b, 1);
  auto unfitted = api.handle({"GET", "/api/node/BmiService.bmi", {}, ""});
  EXPECT_EQ(unfitted.status, 409);
  EXPECT_EQ(unfitted.body["error"], "UnfittedNode");
  EXPECT_TRUE(unfitted.body.contains("meta"));
}

TEST(ApiTest, QueryMatchesCliWithSameSeed) {
  const std::string text = "DIST(Person.weight | 169 < Person.height < 170)";
  auto api = post("/api/query", {{"query", text}, {"seed", 5}});
  ASSERT_EQ(api.status, 200);
  auto c = cli({"query", corpus_bundle_file().string(), text, "--seed", "5"});
  ASSERT_EQ(c.code, 0);
  Json from_cli = Json::parse(c.out);
  EXPECT_EQ(from_cli.dump(), api.body.dump());
  EXPECT_EQ(api.body["meta"]["seed"], 5);
}

TEST(ApiTest, ServerSeedsAreReportedAndReproducible) {
  auto a = post("/api/query", {{"query", "SAMPLE(Person, n=3)"}});
  auto b = post("/api/query", {{"query", "SAMPLE(Person, n=3)"}});
  ASSERT_EQ(a.status, 200);
  auto sa = a.body["meta"]["seed"].get<std::uint64_t>();
  EXPECT_NE(sa, b.body["meta"]["seed"].get<std::uint64_t>());
  auto again = post("/api/query", {{"query", "SAMPLE(Person, n=3)"}, {"seed", sa}});
  EXPECT_EQ(again.body["rows"], a.body["rows"]);
}

TEST(ApiTest, AnomalySimulateCompare) {
  auto an = post("/api/anomaly", {{"node", "Person"}, {"values", {{"weight", -10}}}});
  ASSERT_EQ(an.status, 200);
  EXPECT_TRUE(an.body["detected"].get<bool>());
  auto sim = post("/api/simulate", {{"entry", "NutritionAdvisor.advice"},
                                    {"n", 100},
                                    {"seed", 2},
                                    {"overrides", {{"height", 168.59}, {"weight", {{"lo", 60}, {"hi", 80}}}}}});
  ASSERT_EQ(sim.status, 200) << sim.body.dump();
  EXPECT_EQ(sim.body["runs"], 100);
  EXPECT_EQ(sim.body["meta"]["seed"], 2);
  auto cmp = get("/api/compare", {{"other", corpus_bundle_file().string()}});
  ASSERT_EQ(cmp.status, 200);
  EXPECT_EQ(cmp.body["overall"], "compatible");
  EXPECT_EQ(get("/api/compare", {{"other", "/nonexistent.psm"}}).status, 400);
}

TEST(ApiTest, ServesOverHttp) {
  httplib::Server server;
  mount(server, corpus_api());
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/node/Person");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body).dump(), get("/api/node/Person").body.dump());
  auto missing = client.Get("/api/node/Nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto q = client.Post("/api/query", Json{{"query", "P(Person.weight > 80)"}, {"seed", 1}}.dump(), "application/json");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  EXPECT_EQ(Json::parse(q->body)["kind"], "probability");
  server.stop();
  t.join();
}

}  // namespace
}  // namespace psm::service
