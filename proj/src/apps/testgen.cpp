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
#include <sstream>

#include "common.hpp"
#include "psm/core/error.hpp"
#include "psm/core/rng.hpp"

namespace psm::apps {

using structure::VariableRole;

std::string_view stratum_name(Stratum s) {
  switch (s) {
    case Stratum::Typical: return "typical";
    case Stratum::Rare: return "rare";
    case Stratum::Impossible: return "impossible";
  }
  return "?";
}

Stratum stratum_from_name(std::string_view name) {
  for (Stratum s : {Stratum::Typical, Stratum::Rare, Stratum::Impossible}) {
    if (stratum_name(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidParams, "unknown stratum '" + std::string(name) + "'");
}

bool StrataConfig::contains(Stratum s, double score) const {
  switch (s) {
    case Stratum::Typical: return score >= typical_lo && score <= 1.0;
    case Stratum::Rare: return score > rare_lo && score < rare_hi;
    case Stratum::Impossible: return score < impossible_hi;
  }
  return false;
}

void StrataConfig::validate() const {
  if (!(impossible_hi > 0 && impossible_hi <= rare_lo && rare_lo < rare_hi && rare_hi <= typical_lo &&
        typical_lo <= 1)) {
    throw Error(ErrorCode::InvalidParams, "strata bounds must satisfy 0 < impossible <= rare_lo < rare_hi <= typical <= 1");
  }
  if (!(iqr_inflation > 0)) throw Error(ErrorCode::InvalidParams, "iqr_inflation must be positive");
  if (max_attempts == 0) throw Error(ErrorCode::InvalidParams, "max_attempts must be positive");
}

namespace {

constexpr std::size_t kBatch = 4096;

struct Box {
  int column = 0;
  bool integer = false;
  double lo = 0, hi = 0;        // candidate range
  double min = 0, max = 0;      // observed range
};

std::vector<Box> candidate_box(const density::Density& arg, double inflation) {
  std::vector<Box> out;
  for (std::size_t j = 0; j < arg.variables().size(); ++j) {
    const auto& v = arg.variables()[j];
    if (v.kind != ScalarKind::Float && v.kind != ScalarKind::Int) continue;
    auto it = arg.info().stats.find(v.name);
    if (it == arg.info().stats.end()) continue;
    const auto& s = it->second;
    double iqr = s.q3 - s.q1;
    if (!(iqr > 0)) iqr = std::max(s.max - s.min, 1e-6 * (1 + std::abs(s.mean)));
    Box b;
    b.column = static_cast<int>(j);
    b.integer = v.kind == ScalarKind::Int;
    b.lo = std::min(s.q1 - inflation * iqr, s.min - iqr);
    b.hi = std::max(s.q3 + inflation * iqr, s.max + iqr);
    b.min = s.min;
    b.max = s.max;
    out.push_back(b);
  }
  return out;
}

std::string literal(const Scalar& x, ScalarKind kind) {
  switch (kind) {
    case ScalarKind::Int: return std::to_string(is_numeric(x) ? static_cast<std::int64_t>(std::llround(as_double(x))) : 0);
    case ScalarKind::Float: return format_double(is_numeric(x) ? as_double(x) : 0.0);
    case ScalarKind::Bool: return std::holds_alternative<bool>(x) && std::get<bool>(x) ? "true" : "false";
    case ScalarKind::String: {
      std::string s = std::holds_alternative<std::string>(x) ? std::get<std::string>(x) : "";
      std::string out = "\"";
      for (char c : s) {
        switch (c) {
          case '"': out += "\\\""; break;
          case '\\': out += "\\\\"; break;
          case '\n': out += "\\n"; break;
          case '\t': out += "\\t"; break;
          default: out += c;
        }
      }
      return out + "\"";
    }
  }
  return "0";
}

std::string kind_keyword(const structure::ValueKind& k) {
  if (!k.is_scalar()) return k.ref_type;
  switch (*k.scalar) {
    case ScalarKind::Int: return "int";
    case ScalarKind::Float: return "float";
    case ScalarKind::Bool: return "bool";
    case ScalarKind::String: return "string";
  }
  return "float";
}

}  // namespace

TestSuite generate_tests(const network::ModelNetwork& net, const std::string& target, Stratum stratum,
                         std::size_t n, std::uint64_t seed, const StrataConfig& config) {
  config.validate();
  const auto& node = net.fitted_node(target);
  if (node.kind != network::NodeKind::Executable) {
    throw Error(ErrorCode::InvalidParams, "'" + target + "' is not an executable");
  }
  TestSuite suite;
  suite.target = target;
  suite.stratum = stratum;
  suite.seed = seed;
  for (const auto& v : node.variables) {
    if ((v.role == VariableRole::Param || v.role == VariableRole::FlattenedParam) && node.density.index_of(v.name) >= 0) {
      suite.columns.push_back(v.name);
    }
  }
  if (n == 0) return suite;
  if (suite.columns.empty()) {
    throw Error(ErrorCode::InvalidParams, "'" + target + "' has no modeled arguments");
  }
  density::Density arg = density::marginal(node.density, suite.columns);
  Rng rng(seed);
  std::vector<Box> box;
  if (stratum == Stratum::Impossible) {
    box = candidate_box(arg, config.iqr_inflation);
    if (box.empty()) {
      throw Error(ErrorCode::StratumUnsatisfiable, "impossible stratum needs a numeric argument; found 0 of " +
                                                       std::to_string(n) + " cases");
    }
  }
  while (suite.cases.size() < n && suite.attempts < config.max_attempts) {
    std::size_t batch = std::min(kBatch, config.max_attempts - suite.attempts);
    auto rows = density::sample(arg, rng, batch);
    for (auto& row : rows) {
      ++suite.attempts;
      if (stratum == Stratum::Impossible) {
        bool outside = false;
        for (const auto& b : box) {
          double x = rng.uniform(b.lo, b.hi);
          if (b.integer) {
            x = std::round(x);
            row[static_cast<std::size_t>(b.column)] = static_cast<std::int64_t>(x);
          } else {
            row[static_cast<std::size_t>(b.column)] = x;
          }
          if (x < b.min || x > b.max) outside = true;
        }
        if (!outside) continue;
      }
      double score = density::quantile_score(arg, row);
      if (!config.contains(stratum, score)) continue;
      suite.cases.push_back({std::move(row), score, std::nullopt, {}});
      if (suite.cases.size() == n) break;
    }
  }
  if (suite.cases.size() < n) {
    throw Error(ErrorCode::StratumUnsatisfiable,
                std::string(stratum_name(stratum)) + " stratum of '" + target + "': found " +
                    std::to_string(suite.cases.size()) + " of " + std::to_string(n) + " cases in " +
                    std::to_string(suite.attempts) + " attempts");
  }
  if (config.with_expectations && node.density.index_of("return") >= 0) {
    for (std::size_t i = 0; i < suite.cases.size(); ++i) {
      auto& c = suite.cases[i];
      std::vector<density::Constraint> cs;
      for (std::size_t j = 0; j < suite.columns.size(); ++j) cs.push_back(density::Constraint::at(suite.columns[j], c.args[j]));
      try {
        density::Density d = density::condition(node.density, cs);
        c.expected = inference::summarize(d, "return", Rng(seed).split(i + 1).next_u64());
      } catch (const Error& e) {
        c.note = "no expected return: " + std::string(e.what());
      }
    }
  }
  return suite;
}

Json to_json(const TestSuite& s) {
  auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? Json(*v) : Json(nullptr); };
  Json cases = Json::array();
  for (const auto& c : s.cases) {
    Json args = Json::array();
    for (const auto& x : c.args) args.push_back(scalar_to_json(x));
    Json jc{{"args", args}, {"score", c.score}};
    if (c.expected) {
      jc["expected"] = {{"variable", c.expected->variable},
                        {"mean", opt(c.expected->mean)},
                        {"sd", opt(c.expected->sd)},
                        {"q05", opt(c.expected->q05)},
                        {"median", opt(c.expected->median)},
                        {"q95", opt(c.expected->q95)},
                        {"mode", scalar_to_json(c.expected->mode)},
                        {"histogram", network::to_json(c.expected->histogram)}};
    } else {
      jc["expected"] = nullptr;
    }
    if (!c.note.empty()) jc["note"] = c.note;
    cases.push_back(jc);
  }
  return {{"target", s.target},   {"stratum", stratum_name(s.stratum)}, {"columns", s.columns},
          {"cases", cases},       {"attempts", s.attempts},             {"seed", s.seed}};
}

std::string emit_ml0(const TestSuite& s, const structure::StaticModel& model) {
  const auto* exec = model.find_executable(s.target);
  if (!exec) throw Error(ErrorCode::UnknownNode, "unknown executable '" + s.target + "'");
  auto specs = structure::executable_variables(model, *exec);
  auto column = [&](const std::string& name) {
    auto it = std::find(s.columns.begin(), s.columns.end(), name);
    return it == s.columns.end() ? -1 : static_cast<int>(it - s.columns.begin());
  };
  std::ostringstream out;
  out << "\n// Generated " << stratum_name(s.stratum) << " cases for " << s.target << ".\n";
  for (std::size_t i = 0; i < s.cases.size(); ++i) {
    const auto& c = s.cases[i];
    out << "\ndriver test_" << stratum_name(s.stratum) << "_" << i << "() {\n";
    out << "  // score " << format_double(c.score) << "\n";
    if (!exec->owner.empty()) out << "  let target: " << exec->owner << " = new " << exec->owner << "();\n";
    std::vector<std::string> args;
    for (std::size_t p = 0; p < exec->params.size(); ++p) {
      const auto& param = exec->params[p];
      if (param.kind.is_scalar()) {
        Scalar x;
        for (const auto& v : specs) {
          if (v.role == VariableRole::Param && v.param == param.name && column(v.name) >= 0) {
            x = c.args[static_cast<std::size_t>(column(v.name))];
          }
        }
        args.push_back(literal(x, *param.kind.scalar));
        continue;
      }
      std::string local = "arg" + std::to_string(p);
      out << "  let " << local << ": " << kind_keyword(param.kind) << " = new " << param.kind.ref_type << "();\n";
      for (const auto& v : specs) {
        if (v.role != VariableRole::FlattenedParam || v.param != param.name || column(v.name) < 0) continue;
        const auto* prop = model.find_property(v.source);
        if (!prop) continue;
        out << "  " << local << "." << prop->name << " = "
            << literal(c.args[static_cast<std::size_t>(column(v.name))], v.kind) << ";\n";
      }
      args.push_back(local);
    }
    out << "  " << (exec->owner.empty() ? "" : "target.") << exec->name << "(";
    for (std::size_t a = 0; a < args.size(); ++a) out << (a ? ", " : "") << args[a];
    out << ");\n}\n";
  }
  return out.str();
}

}  // namespace psm::apps
