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

#include <cmath>

#include "internal.hpp"
#include "psm/core/error.hpp"

namespace psm::density {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using A = DensityAccess;

namespace {

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Empty:
      return "empty";
    case Family::Categorical:
      return "categorical";
    case Family::Mixture:
      return "mixture";
  }
  return "empty";
}

std::string_view slot_name(Density::Slot s) {
  switch (s) {
    case Density::Slot::Continuous:
      return "continuous";
    case Density::Slot::Categorical:
      return "categorical";
    case Density::Slot::Point:
      return "point";
  }
  return "continuous";
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double num_in(const Json& j, double missing) { return j.is_null() ? missing : j.get<double>(); }

Json values_json(const std::vector<Scalar>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(scalar_to_json(s));
  return a;
}

std::vector<Scalar> values_in(const Json& j) {
  std::vector<Scalar> out;
  for (const auto& s : j) out.push_back(scalar_from_json(s));
  return out;
}

Json table_json(const CategoricalTable& t) {
  return {{"values", values_json(t.values)}, {"probs", t.probs}, {"oov", t.oov}};
}

CategoricalTable table_in(const Json& j) {
  return {values_in(j.at("values")), j.at("probs").get<std::vector<double>>(), j.at("oov").get<double>()};
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::SchemaMismatch, "density: " + what); }

}  // namespace

Json to_json(const Density& d) {
  Json j;
  j["family"] = family_name(d.family());
  Json vars = Json::array();
  for (std::size_t i = 0; i < d.variables().size(); ++i) {
    const auto& v = d.variables()[i];
    const auto& b = d.bindings()[i];
    vars.push_back({{"name", v.name},
                    {"kind", scalar_kind_name(v.kind)},
                    {"categorical", v.categorical},
                    {"slot", slot_name(b.slot)},
                    {"index", b.index}});
  }
  j["variables"] = vars;
  if (d.family() == Family::Categorical) {
    Json tuples = Json::array();
    for (const auto& t : d.table().tuples) tuples.push_back(values_json(t));
    j["table"] = {{"tuples", tuples}, {"probs", d.table().probs}, {"oov", d.table().oov}};
  }
  if (d.family() == Family::Mixture) {
    j["continuous"] = d.continuous_dims();
    Json comps = Json::array();
    for (const auto& c : d.components()) {
      Json cov = Json::array();
      for (Eigen::Index r = 0; r < c.cov.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < c.cov.cols(); ++k) row.push_back(c.cov(r, k));
        cov.push_back(row);
      }
      Json cats = Json::array();
      for (const auto& t : c.cats) cats.push_back(table_json(t));
      std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
      comps.push_back({{"weight", c.weight}, {"mean", mean}, {"cov", cov}, {"cats", cats}, {"hidden_mass", c.hidden_mass}});
    }
    j["components"] = comps;
    Json hidden = Json::array();
    for (const auto& h : d.hidden()) {
      hidden.push_back({{"lo", num(h.lo)}, {"hi", num(h.hi)}, {"lo_closed", h.lo_closed}, {"hi_closed", h.hi_closed}});
    }
    j["hidden"] = hidden;
  }
  Json points = Json::array();
  for (const auto& p : d.points()) points.push_back({{"value", p.value}, {"eps", p.eps}});
  j["points"] = points;

  const auto& info = d.info();
  Json bic = Json::array();
  for (double b : info.bic) bic.push_back(num(b));
  Json stats = Json::object();
  for (const auto& [name, s] : info.stats) {
    stats[name] = {{"count", s.count}, {"min", s.min}, {"max", s.max}, {"q1", s.q1},
                   {"q3", s.q3},       {"mean", s.mean}, {"sd", s.sd}};
  }
  j["info"] = {{"samples", info.samples},
               {"k", info.k},
               {"converged", info.converged},
               {"low_confidence", info.low_confidence},
               {"em_steps", info.em_steps},
               {"bic", bic},
               {"objective_trace", info.objective_trace},
               {"warnings", info.warnings},
               {"stats", stats}};
  return j;
}

Density density_from_json(const Json& j) {
  try {
    Density d;
    std::string fam = j.at("family").get<std::string>();
    if (fam == "empty") {
      A::family(d) = Family::Empty;
    } else if (fam == "categorical") {
      A::family(d) = Family::Categorical;
    } else if (fam == "mixture") {
      A::family(d) = Family::Mixture;
    } else {
      bad("unknown family '" + fam + "'");
    }
    for (const auto& v : j.at("variables")) {
      auto kind = scalar_kind_from_name(v.at("kind").get<std::string>());
      if (!kind) bad("unknown kind");
      A::vars(d).push_back({v.at("name").get<std::string>(), *kind, v.at("categorical").get<bool>()});
      std::string slot = v.at("slot").get<std::string>();
      Density::Slot s = slot == "continuous"    ? Density::Slot::Continuous
                        : slot == "categorical" ? Density::Slot::Categorical
                        : slot == "point"       ? Density::Slot::Point
                                                : (bad("unknown slot '" + slot + "'"), Density::Slot::Point);
      A::bindings(d).push_back({s, v.at("index").get<int>()});
    }
    if (j.contains("table")) {
      auto& t = A::table(d);
      for (const auto& tup : j["table"].at("tuples")) t.tuples.push_back(values_in(tup));
      t.probs = j["table"].at("probs").get<std::vector<double>>();
      t.oov = j["table"].at("oov").get<double>();
    }
    if (A::family(d) == Family::Mixture) {
      A::continuous(d) = j.at("continuous").get<std::size_t>();
      for (const auto& c : j.at("components")) {
        Component comp;
        comp.weight = c.at("weight").get<double>();
        auto mean = c.at("mean").get<std::vector<double>>();
        comp.mean = Eigen::Map<VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        const auto n = static_cast<Eigen::Index>(mean.size());
        comp.cov = MatrixXd(n, n);
        const auto& cov = c.at("cov");
        if (static_cast<Eigen::Index>(cov.size()) != n) bad("covariance shape");
        for (Eigen::Index r = 0; r < n; ++r) {
          if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != n) bad("covariance shape");
          for (Eigen::Index k = 0; k < n; ++k) comp.cov(r, k) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)].get<double>();
        }
        for (const auto& t : c.at("cats")) comp.cats.push_back(table_in(t));
        comp.hidden_mass = c.at("hidden_mass").get<double>();
        A::components(d).push_back(std::move(comp));
      }
      for (const auto& h : j.at("hidden")) {
        A::hidden(d).push_back({num_in(h.at("lo"), -kInf), num_in(h.at("hi"), kInf), h.at("lo_closed").get<bool>(),
                                h.at("hi_closed").get<bool>()});
      }
    }
    for (const auto& p : j.at("points")) A::points(d).push_back({p.at("value").get<double>(), p.at("eps").get<double>()});
    const auto& ji = j.at("info");
    auto& info = d.mutable_info();
    info.samples = ji.at("samples").get<std::size_t>();
    info.k = ji.at("k").get<int>();
    info.converged = ji.at("converged").get<bool>();
    info.low_confidence = ji.at("low_confidence").get<bool>();
    info.em_steps = ji.at("em_steps").get<std::size_t>();
    for (const auto& b : ji.at("bic")) info.bic.push_back(num_in(b, std::nan("")));
    info.objective_trace = ji.at("objective_trace").get<std::vector<double>>();
    info.warnings = ji.at("warnings").get<std::vector<std::string>>();
    for (const auto& [name, s] : ji.at("stats").items()) {
      info.stats[name] = {s.at("count").get<std::size_t>(), s.at("min").get<double>(), s.at("max").get<double>(),
                          s.at("q1").get<double>(),         s.at("q3").get<double>(),  s.at("mean").get<double>(),
                          s.at("sd").get<double>()};
    }
    // structural sanity
    std::size_t cats = 0, pts = 0, cont = 0;
    for (const auto& b : d.bindings()) {
      if (b.slot == Density::Slot::Categorical) ++cats;
      if (b.slot == Density::Slot::Point) ++pts;
      if (b.slot == Density::Slot::Continuous) ++cont;
    }
    if (pts != d.points().size()) bad("point count");
    if (d.family() == Family::Mixture) {
      if (cont != d.continuous_dims() || d.components().empty()) bad("mixture shape");
      for (const auto& c : d.components()) {
        if (static_cast<std::size_t>(c.mean.size()) != cont + d.hidden().size() || c.cats.size() != cats) {
          bad("component shape");
        }
      }
    }
    if (d.family() == Family::Categorical) {
      for (const auto& t : d.table().tuples) {
        if (t.size() != cats) bad("tuple width");
      }
      if (d.table().tuples.size() != d.table().probs.size()) bad("table size");
    }
    A::reset_cache(d);
    return d;
  } catch (const Json::exception& e) {
    bad(e.what());
  }
}

}  // namespace psm::density
