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


#include "psm/structure/static_model.hpp"

#include <algorithm>

#include "psm/core/error.hpp"

namespace psm::structure {
namespace {

using ml0::Expr;
using ml0::Stmt;

ValueKind kind_of_type(const ml0::Type& t) {
  ValueKind k;
  if (auto s = t.scalar_kind()) {
    k.scalar = s;
  } else {
    k.ref_type = t.class_name;
  }
  return k;
}

class BodyWalker {
 public:
  explicit BodyWalker(ExecutableInfo& info) : info_(info) {}

  void walk(const std::vector<ml0::StmtPtr>& body) {
    for (const auto& s : body) stmt(*s);
  }

 private:
  void stmt(const Stmt& s) {
    if (s.target) expr(*s.target);
    if (s.value) expr(*s.value);
    if (s.kind == Stmt::Kind::AssignField && s.target && s.target->type.kind == ml0::Type::Kind::Class) {
      info_.writes.insert(s.target->type.class_name + "." + s.name);
    }
    walk(s.body);
    walk(s.else_body);
  }

  void expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Field: {
        std::string id = e.owner + "." + e.name;
        if (e.type.is_scalar()) {
          info_.reads.insert(id);
        } else {
          info_.structural_reads.insert(id);
        }
        if (e.target && e.target->kind == Expr::Kind::Field) {
          std::vector<std::string> chain;
          const Expr* cur = &e;
          for (; cur && cur->kind == Expr::Kind::Field; cur = cur->target.get()) {
            chain.push_back(cur->owner + "." + cur->name);
          }
          std::reverse(chain.begin(), chain.end());
          if (std::find(info_.read_chains.begin(), info_.read_chains.end(), chain) == info_.read_chains.end()) {
            info_.read_chains.push_back(std::move(chain));
          }
        }
        break;
      }
      case Expr::Kind::MethodCall:
        if (e.site >= 0) info_.invokes.push_back({e.site, e.owner + "." + e.name});
        break;
      case Expr::Kind::New:
        if (e.site >= 0) info_.invokes.push_back({e.site, e.owner + ".init"});
        break;
      default:
        break;
    }
    if (e.target) expr(*e.target);
    for (const auto& a : e.args) expr(*a);
  }

  ExecutableInfo& info_;
};

ExecutableInfo describe(const ml0::MethodDecl& m, const std::string& owner, bool driver) {
  ExecutableInfo info;
  info.owner = owner;
  info.name = m.name;
  info.id = driver ? m.name : owner + "." + m.name;
  info.driver = driver;
  info.external = driver;
  for (const auto& p : m.params) info.params.push_back({p.name, kind_of_type(p.type)});
  if (m.return_type.kind != ml0::Type::Kind::Void) info.returns = kind_of_type(m.return_type);
  BodyWalker(info).walk(m.body);
  std::sort(info.invokes.begin(), info.invokes.end(),
            [](const CallSite& a, const CallSite& b) { return a.site < b.site; });
  return info;
}

void compute_edges(StaticModel& model) {
  model.edges.clear();
  auto exec_latent = [&](const std::string& id) {
    const ExecutableInfo* e = model.find_executable(id);
    return !e || !model.executable_in_universe(*e);
  };
  auto type_latent = [&](const std::string& id) { return !model.in_universe(id); };
  auto prop_latent = [&](const std::string& id) {
    auto dot = id.find('.');
    return type_latent(id.substr(0, dot));
  };
  auto add = [&](EdgeKind kind, const std::string& from, const std::string& to, int site, bool fl, bool tl) {
    if (fl && tl) return;
    model.edges.push_back({kind, from, to, site, fl, tl});
  };
  for (const auto& e : model.executables) {
    bool fl = exec_latent(e.id);
    for (const auto& p : e.params) {
      if (!p.kind.is_scalar()) add(EdgeKind::ParamSource, e.id, p.kind.ref_type, -1, fl, type_latent(p.kind.ref_type));
    }
    for (const auto& r : e.reads) add(EdgeKind::Read, e.id, r, -1, fl, prop_latent(r));
    for (const auto& r : e.structural_reads) add(EdgeKind::Read, e.id, r, -1, fl, prop_latent(r));
    for (const auto& w : e.writes) add(EdgeKind::Write, e.id, w, -1, fl, prop_latent(w));
    for (const auto& c : e.invokes) add(EdgeKind::Call, e.id, c.callee, c.site, fl, exec_latent(c.callee));
  }
  for (const auto& t : model.types) {
    for (const auto& p : t.properties) add(EdgeKind::Owner, p.id, t.id, -1, type_latent(t.id), type_latent(t.id));
  }
}

Json kind_to_json(const ValueKind& k) {
  if (k.scalar) return Json{{"kind", scalar_kind_name(*k.scalar)}};
  return Json{{"ref", k.ref_type}};
}

ValueKind kind_from_json(const Json& j) {
  ValueKind k;
  if (j.contains("kind")) {
    auto s = scalar_kind_from_name(j.at("kind").get<std::string>());
    if (!s) throw Error(ErrorCode::SchemaMismatch, "unknown scalar kind " + j.at("kind").dump());
    k.scalar = s;
  } else {
    k.ref_type = j.at("ref").get<std::string>();
  }
  return k;
}

std::optional<EdgeKind> edge_kind_from_name(std::string_view n) {
  for (auto k : {EdgeKind::ParamSource, EdgeKind::Read, EdgeKind::Write, EdgeKind::Call, EdgeKind::Owner}) {
    if (edge_kind_name(k) == n) return k;
  }
  return std::nullopt;
}

}  // namespace

std::string_view edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::ParamSource: return "param_source";
    case EdgeKind::Read: return "read";
    case EdgeKind::Write: return "write";
    case EdgeKind::Call: return "call";
    case EdgeKind::Owner: return "owner";
  }
  return "read";
}

const PropertyInfo* TypeInfo::find_property(std::string_view name) const {
  for (const auto& p : properties) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const TypeInfo* StaticModel::find_type(std::string_view id) const {
  auto it = std::lower_bound(types.begin(), types.end(), id, [](const TypeInfo& t, std::string_view v) { return t.id < v; });
  return it != types.end() && it->id == id ? &*it : nullptr;
}

const ExecutableInfo* StaticModel::find_executable(std::string_view id) const {
  auto it = std::lower_bound(executables.begin(), executables.end(), id,
                             [](const ExecutableInfo& e, std::string_view v) { return e.id < v; });
  return it != executables.end() && it->id == id ? &*it : nullptr;
}

const PropertyInfo* StaticModel::find_property(std::string_view id) const {
  auto dot = id.find('.');
  if (dot == std::string_view::npos) return nullptr;
  const TypeInfo* t = find_type(id.substr(0, dot));
  return t ? t->find_property(id.substr(dot + 1)) : nullptr;
}

StaticModel extract(const ml0::Program& program) {
  StaticModel model;
  for (const auto& cls : program.classes) {
    TypeInfo t;
    t.id = cls.name;
    for (const auto& f : cls.properties) t.properties.push_back({cls.name + "." + f.name, f.name, kind_of_type(f.type)});
    model.types.push_back(std::move(t));
    for (const auto& m : cls.methods) model.executables.push_back(describe(m, cls.name, false));
  }
  for (const auto& d : program.drivers) model.executables.push_back(describe(d.fn, "", true));
  std::sort(model.types.begin(), model.types.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(model.executables.begin(), model.executables.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& t : model.types) {
    if (!t.external) model.universe.insert(t.id);
  }
  compute_edges(model);
  return model;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

StaticModel universe_filter(const StaticModel& model, const std::vector<std::string>& include_patterns) {
  StaticModel out = model;
  out.universe.clear();
  for (const auto& t : model.types) {
    if (t.external) continue;
    for (const auto& pat : include_patterns) {
      if (glob_match(pat, t.id)) {
        out.universe.insert(t.id);
        break;
      }
    }
  }
  if (out.universe.empty()) {
    std::string pats;
    for (const auto& p : include_patterns) pats += (pats.empty() ? "" : ", ") + p;
    throw Error(ErrorCode::EmptyUniverse, "no type matches the universe patterns [" + pats + "]");
  }
  compute_edges(out);
  return out;
}

Json to_json(const StaticModel& model) {
  Json types = Json::array();
  for (const auto& t : model.types) {
    Json props = Json::array();
    for (const auto& p : t.properties) {
      Json jp = kind_to_json(p.kind);
      jp["id"] = p.id;
      jp["name"] = p.name;
      jp["flag"] = p.modelable() ? "modelable" : "structural";
      props.push_back(std::move(jp));
    }
    types.push_back(Json{{"id", t.id}, {"external", t.external}, {"in_universe", model.in_universe(t.id)}, {"properties", props}});
  }
  Json execs = Json::array();
  for (const auto& e : model.executables) {
    Json params = Json::array();
    for (const auto& p : e.params) {
      Json jp = kind_to_json(p.kind);
      jp["name"] = p.name;
      params.push_back(std::move(jp));
    }
    Json invokes = Json::array();
    for (const auto& c : e.invokes) invokes.push_back(Json{{"site", c.site}, {"callee", c.callee}});
    execs.push_back(Json{{"id", e.id},
                         {"owner", e.owner},
                         {"name", e.name},
                         {"params", params},
                         {"returns", e.returns ? kind_to_json(*e.returns) : Json(nullptr)},
                         {"reads", e.reads},
                         {"structural_reads", e.structural_reads},
                         {"read_chains", e.read_chains},
                         {"writes", e.writes},
                         {"invokes", invokes},
                         {"external", e.external},
                         {"driver", e.driver},
                         {"in_universe", model.executable_in_universe(e)}});
  }
  Json edges = Json::array();
  for (const auto& e : model.edges) {
    edges.push_back(Json{{"kind", edge_kind_name(e.kind)},
                         {"from", e.from},
                         {"to", e.to},
                         {"site", e.site},
                         {"from_latent", e.from_latent},
                         {"to_latent", e.to_latent}});
  }
  return Json{{"format", "psm-static-model"},
              {"version", 1},
              {"types", types},
              {"executables", execs},
              {"universe", model.universe},
              {"edges", edges}};
}

StaticModel static_model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "psm-static-model" || j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::SchemaMismatch, "not a version 1 static model document");
    }
    StaticModel m;
    for (const auto& jt : j.at("types")) {
      TypeInfo t;
      t.id = jt.at("id").get<std::string>();
      t.external = jt.at("external").get<bool>();
      for (const auto& jp : jt.at("properties")) {
        t.properties.push_back({jp.at("id").get<std::string>(), jp.at("name").get<std::string>(), kind_from_json(jp)});
      }
      m.types.push_back(std::move(t));
    }
    for (const auto& je : j.at("executables")) {
      ExecutableInfo e;
      e.id = je.at("id").get<std::string>();
      e.owner = je.at("owner").get<std::string>();
      e.name = je.at("name").get<std::string>();
      for (const auto& jp : je.at("params")) e.params.push_back({jp.at("name").get<std::string>(), kind_from_json(jp)});
      if (!je.at("returns").is_null()) e.returns = kind_from_json(je.at("returns"));
      e.reads = je.at("reads").get<std::set<std::string>>();
      e.structural_reads = je.at("structural_reads").get<std::set<std::string>>();
      e.read_chains = je.at("read_chains").get<std::vector<std::vector<std::string>>>();
      e.writes = je.at("writes").get<std::set<std::string>>();
      for (const auto& jc : je.at("invokes")) e.invokes.push_back({jc.at("site").get<int>(), jc.at("callee").get<std::string>()});
      e.external = je.at("external").get<bool>();
      e.driver = je.at("driver").get<bool>();
      m.executables.push_back(std::move(e));
    }
    m.universe = j.at("universe").get<std::set<std::string>>();
    for (const auto& je : j.at("edges")) {
      auto kind = edge_kind_from_name(je.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::SchemaMismatch, "unknown edge kind " + je.at("kind").dump());
      m.edges.push_back({*kind, je.at("from").get<std::string>(), je.at("to").get<std::string>(), je.at("site").get<int>(),
                         je.at("from_latent").get<bool>(), je.at("to_latent").get<bool>()});
    }
    std::sort(m.types.begin(), m.types.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(m.executables.begin(), m.executables.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return m;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::SchemaMismatch, std::string("malformed static model: ") + ex.what());
  }
}

}  // namespace psm::structure
