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


#include "psm/service/api.hpp"

#include <cmath>

#include "psm/apps/apps.hpp"
#include "psm/core/rng.hpp"
#include "psm/inference/query.hpp"
#include "psm/trace/log_io.hpp"

namespace psm::service {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownNode: return 404;
    case ErrorCode::UnfittedNode: return 409;
    case ErrorCode::ZeroProbabilityCondition: return 422;
    case ErrorCode::Internal: return 500;
    default: return 400;
  }
}

std::vector<density::Constraint> constraints_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::UsageError, "constraints must be an object");
  std::vector<density::Constraint> out;
  for (const auto& [name, v] : j.items()) {
    if (v.is_object()) {
      density::Interval iv;
      if (v.contains("lo") && !v["lo"].is_null()) iv.lo = v["lo"].get<double>();
      if (v.contains("hi") && !v["hi"].is_null()) iv.hi = v["hi"].get<double>();
      iv.lo_closed = v.value("lo_closed", false);
      iv.hi_closed = v.value("hi_closed", false);
      out.push_back(density::Constraint::within(name, iv));
    } else {
      out.push_back(density::Constraint::at(name, scalar_from_json(v)));
    }
  }
  return out;
}

Json node_view(const network::ModelNode& node) {
  Json vars = Json::array();
  for (std::size_t i = 0; i < node.variables.size(); ++i) {
    const auto& spec = node.variables[i];
    Json jv{{"name", spec.name}, {"kind", scalar_kind_name(spec.kind)}};
    const network::Histogram* h = nullptr;
    for (const auto& o : node.observed) {
      if (o.variable == spec.name) h = &o;
    }
    jv["histogram"] = h ? network::to_json(*h) : Json(nullptr);
    Json fitted = nullptr;
    if (h && node.fitted && node.density.index_of(spec.name) >= 0) {
      density::Density m = density::marginal(node.density, {spec.name});
      Json mass = Json::array(), dens = Json::array(), xs = Json::array();
      if (h->categorical) {
        for (const auto& v : h->values) {
          double p = 0;
          try {
            p = std::exp(density::log_density(m, {v}));
          } catch (const Error&) {
          }
          mass.push_back(p);
        }
        fitted = {{"mass", mass}};
      } else {
        double prev = density::cdf(m, spec.name, h->lo);
        for (std::size_t b = 0; b < h->mass.size(); ++b) {
          double x = h->center(b);
          double c = density::cdf(m, spec.name, h->lo + static_cast<double>(b + 1) * h->width());
          xs.push_back(x);
          mass.push_back(std::max(0.0, c - prev));
          double ld = density::log_density(m, {spec.kind == ScalarKind::Int ? Scalar{static_cast<std::int64_t>(std::llround(x))} : Scalar{x}});
          dens.push_back(std::isfinite(ld) ? std::exp(ld) : 0.0);
          prev = std::max(prev, c);
        }
        fitted = {{"x", xs}, {"density", dens}, {"mass", mass}};
      }
    }
    jv["fitted"] = fitted;
    vars.push_back(jv);
  }
  return {{"id", node.id},
          {"kind", network::node_kind_name(node.kind)},
          {"fitted", node.fitted},
          {"low_confidence", node.low_confidence},
          {"samples", node.samples},
          {"k", node.density.info().k},
          {"variables", vars}};
}

Api::Api(Bundle bundle, std::uint64_t seed, Loader loader)
    : bundle_(std::move(bundle)), hash_(bundle_.hash()), seed_(seed), loader_(std::move(loader)) {}

std::uint64_t Api::next_seed() const { return Rng(seed_).split(counter_.fetch_add(1)).next_u64(); }

Json Api::meta(std::uint64_t seed) const {
  return {{"bundle", hash_}, {"model_hash", bundle_.provenance.model_hash},
          {"trace_hash", bundle_.provenance.trace_hash}, {"seed", seed}};
}

namespace {

Json parse_body(const std::string& body) {
  try {
    Json j = Json::parse(body.empty() ? "{}" : body);
    if (!j.is_object()) throw Error(ErrorCode::UsageError, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::UsageError, std::string("malformed JSON body: ") + e.what());
  }
}

Json network_view(const network::ModelNetwork& net) {
  Json nodes = Json::array();
  for (const auto& [id, n] : net.nodes()) {
    Json vars = Json::array();
    for (const auto& v : n.variables) vars.push_back({{"name", v.name}, {"kind", scalar_kind_name(v.kind)}});
    nodes.push_back({{"id", id},
                     {"kind", network::node_kind_name(n.kind)},
                     {"fitted", n.fitted},
                     {"low_confidence", n.low_confidence},
                     {"samples", n.samples},
                     {"k", n.density.info().k},
                     {"variables", vars}});
  }
  Json model = structure::to_json(net.model());
  return {{"nodes", nodes}, {"edges", model["edges"]}, {"types", model["types"]}, {"report", network::to_json(net.report())}};
}

}  // namespace

ApiResponse Api::handle(const ApiRequest& req) const {
  std::uint64_t seed = 0;
  auto ok = [&](Json body) {
    body["meta"] = meta(seed);
    return ApiResponse{200, std::move(body)};
  };
  try {
    const std::string& p = req.path;
    auto need = [&](const char* method) {
      if (req.method != method) throw Error(ErrorCode::UsageError, p + " expects " + method);
    };
    if (p == "/api/network") {
      need("GET");
      return ok(network_view(bundle_.net));
    }
    if (p.rfind("/api/node/", 0) == 0) {
      need("GET");
      std::string id = p.substr(10);
      const auto& node = bundle_.net.fitted_node(id);
      return ok(node_view(node));
    }
    if (p == "/api/query") {
      need("POST");
      Json body = parse_body(req.body);
      inference::Query q = inference::query_from_json(body);
      seed = q.seed ? *q.seed : body.contains("seed") ? body["seed"].get<std::uint64_t>() : next_seed();
      inference::RunOptions opt;
      opt.seed = seed;
      Bundle other;
      if (q.kind == inference::QueryKind::Divergence) {
        other = loader_(q.other);
        opt.other = &other.net;
      }
      return ok(inference::to_json(inference::run(bundle_.net, q, opt)));
    }
    if (p == "/api/anomaly") {
      need("POST");
      Json body = parse_body(req.body);
      apps::Observation obs;
      obs.node = body.at("node").get<std::string>();
      for (const auto& [name, v] : body.at("values").items()) obs.values.emplace_back(name, scalar_from_json(v));
      apps::AnomalyConfig cfg;
      cfg.tau = body.value("tau", cfg.tau);
      if (body.contains("scope")) cfg.scope = body["scope"].get<std::vector<std::string>>();
      if (body.contains("trace")) {
        auto live = trace::assemble_frames(trace::read_log(body["trace"].get<std::string>()), bundle_.net.model());
        return ok(apps::to_json(apps::check(bundle_.net, obs, cfg, &live)));
      }
      return ok(apps::to_json(apps::check(bundle_.net, obs, cfg)));
    }
    if (p == "/api/simulate") {
      need("POST");
      Json body = parse_body(req.body);
      apps::SimulationConfig cfg;
      cfg.n = body.value("n", std::size_t{1000});
      seed = body.contains("seed") ? body["seed"].get<std::uint64_t>() : next_seed();
      cfg.seed = seed;
      cfg.max_depth = body.value("max_depth", cfg.max_depth);
      if (body.contains("overrides")) cfg.overrides = constraints_from_json(body["overrides"]);
      auto r = apps::simulate(bundle_.net, body.at("entry").get<std::string>(), cfg);
      return ok(apps::to_json(r, body.value("rows", false)));
    }
    if (p == "/api/compare") {
      need("GET");
      auto it = req.params.find("other");
      if (it == req.params.end()) throw Error(ErrorCode::UsageError, "missing 'other' parameter");
      apps::CompareConfig cfg;
      if (auto m = req.params.find("mode"); m != req.params.end()) cfg.mode = apps::compare_mode_from_name(m->second);
      Bundle other = loader_(it->second);
      return ok(apps::to_json(apps::compare(bundle_.net, other.net, cfg)));
    }
    Json body{{"error", "NotFound"}, {"message", "no route " + req.method + " " + p}};
    body["meta"] = meta(seed);
    return {404, body};
  } catch (const Error& e) {
    Json body{{"error", e.code_name()}, {"message", e.what()}};
    body["meta"] = meta(seed);
    return {http_status(e.code()), body};
  } catch (const Json::exception& e) {
    Json body{{"error", "UsageError"}, {"message", std::string("malformed request: ") + e.what()}};
    body["meta"] = meta(seed);
    return {400, body};
  } catch (const std::exception& e) {
    Json body{{"error", "Internal"}, {"message", e.what()}};
    body["meta"] = meta(seed);
    return {500, body};
  }
}

}  // namespace psm::service
