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


#include "psm/service/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "psm/apps/apps.hpp"
#include "psm/core/hash.hpp"
#include "psm/inference/query.hpp"
#include "psm/minilang/interpreter.hpp"
#include "psm/minilang/parser.hpp"
#include "psm/service/api.hpp"
#include "psm/service/bundle.hpp"
#include "psm/structure/static_model.hpp"
#include "psm/trace/assemble.hpp"
#include "psm/trace/log_io.hpp"

// After Eigen: the resolver header it pulls in defines _res.
#include <httplib.h>

namespace psm::service {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return kExitUsage;
    case ErrorCode::Internal: return kExitInternal;
    default: return kExitData;
  }
}

Scalar parse_literal(std::string_view t) {
  if (t == "true") return true;
  if (t == "false") return false;
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return std::string(t.substr(1, t.size() - 2));
  std::int64_t i = 0;
  auto ri = std::from_chars(t.data(), t.data() + t.size(), i);
  if (ri.ec == std::errc() && ri.ptr == t.data() + t.size()) return i;
  if (t == "inf" || t == "+inf") return density::kInf;
  if (t == "-inf") return -density::kInf;
  double d = 0;
  auto rd = std::from_chars(t.data(), t.data() + t.size(), d);
  if (rd.ec == std::errc() && rd.ptr == t.data() + t.size()) return d;
  return std::string(t);
}

density::Constraint parse_assignment(std::string_view text) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::UsageError, "expected name=value, got '" + std::string(text) + "'");
  }
  std::string name(text.substr(0, eq));
  std::string_view v = text.substr(eq + 1);
  if (v.size() >= 2 && (v.front() == '[' || v.front() == '(') && (v.back() == ']' || v.back() == ')')) {
    auto comma = v.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::UsageError, "interval needs lo,hi: '" + std::string(v) + "'");
    Scalar lo = parse_literal(v.substr(1, comma - 1)), hi = parse_literal(v.substr(comma + 1, v.size() - comma - 2));
    if (!is_numeric(lo) || !is_numeric(hi)) throw Error(ErrorCode::UsageError, "interval bounds must be numbers");
    return density::Constraint::within(name, {as_double(lo), as_double(hi), v.front() == '[', v.back() == ']'});
  }
  return density::Constraint::at(name, parse_literal(v));
}

std::string histogram_svg(const network::Histogram& h, const std::string& title) {
  const double width = 640, height = 320, left = 50, bottom = 40, top = 30;
  const double plot_w = width - left - 10, plot_h = height - bottom - top;
  double peak = 0;
  for (double m : h.mass) peak = std::max(peak, m);
  if (peak <= 0) peak = 1;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">";
  for (char c : title) {
    if (c == '<') s << "&lt;";
    else if (c == '>') s << "&gt;";
    else if (c == '&') s << "&amp;";
    else s << c;
  }
  s << "</text>\n";
  const std::size_t n = h.mass.size();
  const double bar = n ? plot_w / static_cast<double>(n) : 0;
  for (std::size_t i = 0; i < n; ++i) {
    double bh = h.mass[i] / peak * plot_h;
    s << "<rect x=\"" << left + bar * static_cast<double>(i) << "\" y=\"" << top + plot_h - bh << "\" width=\""
      << std::max(bar - (h.categorical ? 2.0 : 0.0), 0.5) << "\" height=\"" << bh << "\" fill=\"#4a7ab5\"/>\n";
  }
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, const std::string& text) {
    s << "<text x=\"" << x << "\" y=\"" << height - 15 << "\" font-family=\"sans-serif\" font-size=\"11\">" << text
      << "</text>\n";
  };
  if (h.categorical) {
    for (std::size_t i = 0; i < n && i < h.values.size(); ++i) label(left + bar * static_cast<double>(i), to_display(h.values[i]));
  } else {
    label(left, format_double(h.lo));
    label(left + plot_w - 40, format_double(h.hi));
  }
  s << "</svg>\n";
  return s.str();
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  f << text;
}

// Runs an API request and fails like the API would.
Json call(const Api& api, ApiRequest req) {
  ApiResponse r = api.handle(req);
  if (r.status != 200) {
    std::string name = r.body.value("error", "Internal");
    ErrorCode code = ErrorCode::Internal;
    for (int c = 0; c <= static_cast<int>(ErrorCode::Internal); ++c) {
      if (error_code_name(static_cast<ErrorCode>(c)) == name) code = static_cast<ErrorCode>(c);
    }
    throw Error(code, r.body.value("message", "request failed"));
  }
  return r.body;
}

struct Options {
  bool json = false;
  std::string output;
  std::string source, model, trace, bundle, other, text, node, target, stratum = "rare", entry, mode = "integrity";
  std::string plot, emit_dir, program, host = "127.0.0.1";
  std::vector<std::string> includes, values, sets, scope;
  std::uint64_t seed = 0, iterations = 1000, n = 0;
  std::size_t count = 50;
  double tau = 0.1;
  int port = 8080, max_depth = 16;
  bool rows = false;
  density::FitConfig fit;
};

void cmd_analyze(const Options& o, std::ostream& out) {
  auto model = structure::extract(ml0::parse(read_file(o.source)));
  if (!o.includes.empty()) model = structure::universe_filter(model, o.includes);
  write_output(o.output, structure::to_json(model).dump(1) + "\n", out);
}

void cmd_run(const Options& o, std::ostream& out) {
  ml0::ExecOptions opt;
  opt.seed = o.seed;
  opt.iterations = o.iterations;
  opt.entry = o.entry;
  write_output(o.output, trace::write_log(ml0::execute(ml0::parse(read_file(o.source)), opt)), out);
}

void cmd_fit(const Options& o, std::ostream& out) {
  Json mj;
  try {
    mj = Json::parse(read_file(o.model));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "'" + o.model + "' is not JSON: " + e.what());
  }
  structure::StaticModel model = structure::static_model_from_json(mj);
  std::string trace_text = read_file(o.trace);
  trace::TraceLog log = trace::read_log(trace_text);
  trace::validate(log);
  if (log.events.empty()) throw Error(ErrorCode::NoData, "trace '" + o.trace + "' has no events");
  trace::RowsByNode rows = trace::assemble(log, model);
  std::size_t total = 0;
  for (const auto& [id, r] : rows) total += r.rows.size();
  if (total == 0) throw Error(ErrorCode::NoData, "trace '" + o.trace + "' has no observations for the model");
  Bundle b;
  b.net = network::build(model);
  network::fit_all(b.net, rows, o.fit, o.seed);
  b.provenance.model_hash = hex64(fnv1a64(structure::to_json(model).dump()));
  b.provenance.trace_hash = hex64(fnv1a64(trace_text));
  b.provenance.seed = o.seed;
  b.provenance.config = o.fit;
  if (o.output.empty()) throw Error(ErrorCode::UsageError, "fit needs -o bundle");
  save_bundle(o.output, b);
  if (o.json) {
    out << network::to_json(b.net.report()).dump() << "\n";
    return;
  }
  out << "node                                    kind        samples  k  status\n";
  for (const auto& e : b.net.report().entries) {
    std::string status = !e.fitted ? "unfitted" : e.low_confidence ? "low-confidence" : "fitted";
    std::string id = e.node;
    id.resize(std::max<std::size_t>(id.size(), 39), ' ');
    std::string kind(network::node_kind_name(e.kind));
    kind.resize(std::max<std::size_t>(kind.size(), 10), ' ');
    out << id << " " << kind << "  " << e.samples << "  " << e.k << "  " << status << "\n";
  }
}

void cmd_query(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  Json body{{"query", o.text}, {"seed", o.seed}};
  Json result = call(api, {"POST", "/api/query", {}, body.dump()});
  write_output(o.output, result.dump(1) + "\n", out);
  if (o.plot.empty()) return;
  inference::Query q = inference::parse_query(o.text);
  inference::QueryResult r;
  if (q.kind != inference::QueryKind::Distribution) {
    std::string var = q.event ? q.event->variable : !q.targets.empty() ? q.targets[0] : !q.point.empty() ? q.point[0].first : "";
    if (var.empty()) throw Error(ErrorCode::UsageError, "--plot needs a query over a variable");
    inference::Query d;
    d.kind = inference::QueryKind::Distribution;
    d.node = q.node;
    d.targets = {var};
    if (q.kind != inference::QueryKind::Score) d.constraints = q.constraints;
    d.seed = q.seed ? *q.seed : o.seed;
    r = inference::run(api.bundle().net, d, {o.seed});
  } else {
    inference::RunOptions opt;
    opt.seed = o.seed;
    r = inference::run(api.bundle().net, q, opt);
  }
  const auto& s = r.distributions.at(0);
  std::ofstream f(o.plot);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + o.plot + "'");
  f << histogram_svg(s.histogram, q.node + "." + s.variable);
}

void cmd_detect(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  Json values = Json::object();
  for (const auto& v : o.values) {
    auto c = parse_assignment(v);
    if (!c.point) throw Error(ErrorCode::UsageError, "--value takes name=value");
    values[c.variable] = scalar_to_json(*c.point);
  }
  Json body{{"node", o.node}, {"values", values}, {"tau", o.tau}};
  if (!o.scope.empty()) body["scope"] = o.scope;
  if (!o.trace.empty()) body["trace"] = read_file(o.trace);
  write_output(o.output, call(api, {"POST", "/api/anomaly", {}, body.dump()}).dump(1) + "\n", out);
}

void cmd_gentest(const Options& o, std::ostream& out) {
  Bundle b = load_bundle(o.bundle);
  apps::Stratum s = apps::stratum_from_name(o.stratum);
  apps::TestSuite suite = apps::generate_tests(b.net, o.target, s, o.count, o.seed);
  write_output(o.output, apps::to_json(suite).dump(1) + "\n", out);
  if (o.emit_dir.empty()) return;
  std::filesystem::create_directories(o.emit_dir);
  std::string file = o.target;
  std::replace(file.begin(), file.end(), '.', '_');
  file += "_" + std::string(apps::stratum_name(s)) + ".ml0";
  std::string text = o.program.empty() ? "" : read_file(o.program);
  text += apps::emit_ml0(suite, b.net.model());
  write_output((std::filesystem::path(o.emit_dir) / file).string(), text, out);
}

void cmd_simulate(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  Json overrides = Json::object();
  for (const auto& s : o.sets) {
    auto c = parse_assignment(s);
    if (c.point) {
      overrides[c.variable] = scalar_to_json(*c.point);
    } else {
      Json iv{{"lo_closed", c.interval.lo_closed}, {"hi_closed", c.interval.hi_closed}};
      iv["lo"] = std::isfinite(c.interval.lo) ? Json(c.interval.lo) : Json(nullptr);
      iv["hi"] = std::isfinite(c.interval.hi) ? Json(c.interval.hi) : Json(nullptr);
      overrides[c.variable] = iv;
    }
  }
  Json body{{"entry", o.entry}, {"n", o.n}, {"seed", o.seed}, {"overrides", overrides}, {"max_depth", o.max_depth},
            {"rows", o.rows}};
  write_output(o.output, call(api, {"POST", "/api/simulate", {}, body.dump()}).dump(1) + "\n", out);
}

void cmd_diff(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  Json r = call(api, {"GET", "/api/compare", {{"other", o.other}, {"mode", o.mode}}, ""});
  write_output(o.output, r.dump(1) + "\n", out);
}

void cmd_show(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  Json r = o.node.empty() ? call(api, {"GET", "/api/network", {}, ""}) : call(api, {"GET", "/api/node/" + o.node, {}, ""});
  write_output(o.output, r.dump(1) + "\n", out);
}

void cmd_serve(const Options& o, std::ostream& out) {
  Api api(load_bundle(o.bundle), o.seed);
  httplib::Server server;
  mount(server, api);
  out << "serving " << o.bundle << " (" << api.hash() << ") on http://" << o.host << ":" << o.port << "\n" << std::flush;
  if (!server.listen(o.host, o.port)) throw Error(ErrorCode::IoError, "cannot listen on port " + std::to_string(o.port));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Analyze, trace, fit and query ML0 programs", "psm"};
  app.require_subcommand(1);
  app.add_flag("--json", o.json, "Print errors as single-line JSON on stderr");
  std::function<void(const Options&, std::ostream&)> action;

  auto attach = [&](CLI::App* sub, void (*fn)(const Options&, std::ostream&)) {
    sub->callback([&action, fn] { action = fn; });
    sub->add_flag("--json", o.json, "Print errors as single-line JSON on stderr");
  };

  auto* analyze = app.add_subcommand("analyze", "Extract the static model of an ML0 program");
  analyze->add_option("source", o.source, "ML0 source file")->required();
  analyze->add_option("-o,--output", o.output, "Output file (default stdout)");
  analyze->add_option("--include", o.includes, "Glob over type ids kept in the modeling universe");
  attach(analyze, cmd_analyze);

  auto* run = app.add_subcommand("run", "Execute an ML0 program and write its trace");
  run->add_option("source", o.source, "ML0 source file")->required();
  run->add_option("--seed", o.seed, "Sampler seed");
  run->add_option("--iterations", o.iterations, "Entry driver iterations");
  run->add_option("--entry", o.entry, "Entry driver (default: the program's first)");
  run->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(run, cmd_run);

  auto* fit = app.add_subcommand("fit", "Fit the model network and write a bundle");
  fit->add_option("model", o.model, "Static model JSON")->required();
  fit->add_option("trace", o.trace, "Trace log")->required();
  fit->add_option("-o,--output", o.output, "Bundle file")->required();
  fit->add_option("--seed", o.seed, "Fit seed");
  fit->add_option("--kmax", o.fit.kmax, "Largest mixture size considered");
  fit->add_option("--tol", o.fit.tolerance, "Relative EM convergence tolerance");
  fit->add_option("--min-samples", o.fit.min_samples, "Rows below which a node is low-confidence");
  fit->add_option("--restarts", o.fit.restarts, "EM restarts per mixture size");
  fit->add_option("--max-iterations", o.fit.max_iterations, "EM iteration budget per run");
  attach(fit, cmd_fit);

  auto* query = app.add_subcommand("query", "Run a probabilistic query against a bundle");
  query->add_option("bundle", o.bundle, "Bundle file")->required();
  query->add_option("query", o.text, "Query text, e.g. \"P(Person.weight > 80)\"")->required();
  query->add_option("--seed", o.seed, "Seed for sampling-based answers");
  query->add_option("--plot", o.plot, "Write the queried distribution as SVG");
  query->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(query, cmd_query);

  auto* detect = app.add_subcommand("detect", "Score an observation and trace its ripple");
  detect->add_option("bundle", o.bundle, "Bundle file")->required();
  detect->add_option("--node", o.node, "Node id")->required();
  detect->add_option("--value", o.values, "Observed value, name=value")->required();
  detect->add_option("--tau", o.tau, "Detection threshold");
  detect->add_option("--trace", o.trace, "Live trace log for the ripple path");
  detect->add_option("--scope", o.scope, "Glob over node ids scored on the ripple path");
  detect->add_option("--seed", o.seed, "Seed reported in the metadata");
  detect->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(detect, cmd_detect);

  auto* gentest = app.add_subcommand("gentest", "Generate a stratified test suite");
  gentest->add_option("bundle", o.bundle, "Bundle file")->required();
  gentest->add_option("--target", o.target, "Target executable id")->required();
  gentest->add_option("--stratum", o.stratum, "typical, rare or impossible");
  gentest->add_option("-n", o.count, "Number of cases");
  gentest->add_option("--seed", o.seed, "Generator seed");
  gentest->add_option("-o,--output", o.output, "Suite JSON (default stdout)");
  gentest->add_option("--emit-ml0", o.emit_dir, "Directory for the generated ML0 drivers");
  gentest->add_option("--program", o.program, "ML0 source prepended to the emitted drivers");
  attach(gentest, cmd_gentest);

  auto* simulate = app.add_subcommand("simulate", "Simulate the program over the model network");
  simulate->add_option("bundle", o.bundle, "Bundle file")->required();
  simulate->add_option("--entry", o.entry, "Entry executable id")->required();
  simulate->add_option("-n", o.n, "Runs")->default_val(1000);
  simulate->add_option("--seed", o.seed, "Simulation seed");
  simulate->add_option("--set", o.sets, "Override, name=value or name=[lo,hi]");
  simulate->add_option("--max-depth", o.max_depth, "Call depth cap");
  simulate->add_flag("--rows", o.rows, "Include the simulated rows");
  simulate->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(simulate, cmd_simulate);

  auto* diff = app.add_subcommand("diff", "Compare two bundles");
  diff->add_option("old", o.bundle, "Bundle file")->required();
  diff->add_option("new", o.other, "Bundle file")->required();
  diff->add_option("--mode", o.mode, "integrity or compatibility");
  diff->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(diff, cmd_diff);

  auto* show = app.add_subcommand("show", "Print the network, or one node with its histograms");
  show->add_option("bundle", o.bundle, "Bundle file")->required();
  show->add_option("node", o.node, "Node id");
  show->add_option("-o,--output", o.output, "Output file (default stdout)");
  attach(show, cmd_show);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a bundle");
  serve->add_option("bundle", o.bundle, "Bundle file")->required();
  serve->add_option("--port", o.port, "Port");
  serve->add_option("--host", o.host, "Listen address");
  serve->add_option("--seed", o.seed, "Server seed");
  attach(serve, cmd_serve);

  auto fail = [&](ErrorCode code, const std::string& message) {
    int rc = exit_code(code);
    if (o.json) {
      err << Json{{"error", error_code_name(code)}, {"message", message}, {"exit", rc}}.dump() << "\n";
    } else {
      err << "psm: " << error_code_name(code) << ": " << message << "\n";
    }
    return rc;
  };
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    for (const auto& a : args) {
      if (a == "--json") o.json = true;
    }
    return fail(ErrorCode::UsageError, e.what());
  }
  try {
    action(o, out);
    return kExitOk;
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::Internal, e.what());
  }
}

}  // namespace psm::service
