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

#include <cctype>
#include <charconv>
#include <cmath>

namespace psm::inference {

using density::Constraint;
using density::Interval;
using density::kInf;

namespace {

bool same_constraint(const Constraint& a, const Constraint& b) {
  return a.variable == b.variable && a.point == b.point && (a.point || a.interval == b.interval);
}

bool same_constraints(const std::vector<Constraint>& a, const std::vector<Constraint>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_constraint(a[i], b[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------- lexer

enum class Tok { Ident, Node, Number, String, LParen, RParen, Comma, Dot, Bar, Lt, Le, Gt, Ge, Eq, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Scalar value;  // Number / String
  std::size_t pos = 0;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [](std::size_t pos, const std::string& msg) { throw QuerySyntaxError(pos, msg); };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(s.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+') && i + 1 < s.size() &&
                (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.' || s[i + 1] == 'i'))) {
      std::size_t j = i + 1;
      if (s.compare(j, 3, "inf") == 0) {
        t.kind = Tok::Number;
        t.value = c == '-' ? -kInf : kInf;
        t.text = std::string(s.substr(i, 4));
        i = j + 3;
        out.push_back(t);
        continue;
      }
      bool real = false;
      while (j < s.size()) {
        char d = s[j];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++j;
        } else if (d == '.' || d == 'e' || d == 'E') {
          real = true;
          ++j;
          if ((d == 'e' || d == 'E') && j < s.size() && (s[j] == '-' || s[j] == '+')) ++j;
        } else {
          break;
        }
      }
      t.kind = Tok::Number;
      t.text = std::string(s.substr(i, j - i));
      std::string body = t.text[0] == '+' ? t.text.substr(1) : t.text;
      if (real) {
        double v = 0;
        auto r = std::from_chars(body.data(), body.data() + body.size(), v);
        if (r.ec != std::errc() || r.ptr != body.data() + body.size()) fail(i, "malformed number '" + t.text + "'");
        t.value = v;
      } else {
        std::int64_t v = 0;
        auto r = std::from_chars(body.data(), body.data() + body.size(), v);
        if (r.ec != std::errc() || r.ptr != body.data() + body.size()) fail(i, "malformed number '" + t.text + "'");
        t.value = v;
      }
      i = j;
    } else if (c == '"') {
      std::string v;
      std::size_t j = i + 1;
      for (;;) {
        if (j >= s.size()) fail(i, "unterminated string");
        if (s[j] == '"') break;
        if (s[j] == '\\') {
          if (j + 1 >= s.size()) fail(j, "dangling escape");
          char e = s[j + 1];
          if (e != '"' && e != '\\') fail(j, "unknown escape");
          v += e;
          j += 2;
          continue;
        }
        v += s[j++];
      }
      t.kind = Tok::String;
      t.value = v;
      i = j + 1;
    } else if (c == '[') {
      std::size_t j = s.find(']', i + 1);
      if (j == std::string_view::npos) fail(i, "unterminated node id");
      t.kind = Tok::Node;
      t.text = std::string(s.substr(i + 1, j - i - 1));
      if (t.text.empty()) fail(i, "empty node id");
      i = j + 1;
    } else {
      auto two = s.substr(i, 2);
      if (two == "<=") {
        t.kind = Tok::Le;
        i += 2;
      } else if (two == ">=") {
        t.kind = Tok::Ge;
        i += 2;
      } else {
        switch (c) {
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          case '.': t.kind = Tok::Dot; break;
          case '|': t.kind = Tok::Bar; break;
          case '<': t.kind = Tok::Lt; break;
          case '>': t.kind = Tok::Gt; break;
          case '=': t.kind = Tok::Eq; break;
          default: fail(i, std::string("unexpected character '") + c + "'");
        }
        ++i;
      }
    }
    out.push_back(t);
  }
  Token end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- parser

struct Ref {
  std::string node;
  std::string variable;  // empty: bare node
  std::size_t pos = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  Query parse() {
    const Token& kw = expect(Tok::Ident, "query kind");
    Query q;
    if (kw.text == "P") {
      q.kind = QueryKind::Probability;
    } else if (kw.text == "DIST") {
      q.kind = QueryKind::Distribution;
    } else if (kw.text == "SAMPLE") {
      q.kind = QueryKind::Sample;
    } else if (kw.text == "SCORE") {
      q.kind = QueryKind::Score;
    } else if (kw.text == "DIV") {
      q.kind = QueryKind::Divergence;
    } else {
      fail(kw.pos, "unknown query kind '" + kw.text + "' (expected P, DIST, SAMPLE, SCORE or DIV)");
    }
    expect(Tok::LParen, "'('");
    switch (q.kind) {
      case QueryKind::Probability: {
        auto c = constraint(q);
        q.targets = {c.variable};
        q.event = std::move(c);
        break;
      }
      case QueryKind::Distribution:
        do {
          Ref r = ref(false);
          bind(q, r);
          q.targets.push_back(r.variable);
        } while (accept(Tok::Comma) && !option_ahead());
        if (toks_[i_ - 1].kind == Tok::Comma) --i_;
        break;
      case QueryKind::Sample: {
        Ref r = ref(true);
        bind(q, r);
        if (!r.variable.empty()) {
          q.targets.push_back(r.variable);
          while (peek().kind == Tok::Comma && !option_ahead(1)) {
            ++i_;
            Ref more = ref(false);
            bind(q, more);
            q.targets.push_back(more.variable);
          }
        }
        break;
      }
      case QueryKind::Score:
        do {
          Ref r = ref(false);
          bind(q, r);
          expect(Tok::Eq, "'='");
          q.point.emplace_back(r.variable, literal());
        } while (accept(Tok::Comma) && !option_ahead());
        if (toks_[i_ - 1].kind == Tok::Comma) --i_;
        break;
      case QueryKind::Divergence: {
        Ref r = ref(true);
        if (!r.variable.empty()) fail(r.pos, "DIV takes a node, not a variable");
        bind(q, r);
        break;
      }
    }
    if (accept(Tok::Bar)) {
      if (q.kind == QueryKind::Score || q.kind == QueryKind::Divergence) {
        fail(toks_[i_ - 1].pos, "conditions are not allowed here");
      }
      do {
        q.constraints.push_back(constraint(q));
      } while (peek().kind == Tok::Comma && !option_ahead(1) && (++i_, true));
    }
    bool have_n = false;
    while (accept(Tok::Comma)) {
      const Token& name = expect(Tok::Ident, "option name");
      expect(Tok::Eq, "'='");
      if (name.text == "n" && q.kind == QueryKind::Sample) {
        const Token& v = expect(Tok::Number, "sample count");
        if (!std::holds_alternative<std::int64_t>(v.value) || std::get<std::int64_t>(v.value) < 0) {
          fail(v.pos, "n must be a non-negative integer");
        }
        q.n = static_cast<std::size_t>(std::get<std::int64_t>(v.value));
        have_n = true;
      } else if (name.text == "seed") {
        const Token& v = expect(Tok::Number, "seed");
        if (!std::holds_alternative<std::int64_t>(v.value) || std::get<std::int64_t>(v.value) < 0) {
          fail(v.pos, "seed must be a non-negative integer");
        }
        q.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(v.value));
      } else if (name.text == "other" && q.kind == QueryKind::Divergence) {
        const Token& v = expect(Tok::String, "bundle reference");
        q.other = std::get<std::string>(v.value);
      } else {
        fail(name.pos, "unknown option '" + name.text + "'");
      }
    }
    if (q.kind == QueryKind::Sample && !have_n) fail(peek().pos, "SAMPLE needs n=<count>");
    if (q.kind == QueryKind::Divergence && q.other.empty()) fail(peek().pos, "DIV needs other=\"<bundle>\"");
    expect(Tok::RParen, "')'");
    expect(Tok::End, "end of query");
    return q;
  }

 private:
  [[noreturn]] void fail(std::size_t pos, const std::string& msg) const { throw QuerySyntaxError(pos, msg); }

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }

  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++i_;
    return true;
  }

  const Token& expect(Tok k, const std::string& what) {
    const Token& t = peek();
    if (t.kind != k) fail(t.pos, "expected " + what);
    ++i_;
    return t;
  }

  // `, name =` with name a bare identifier starts the option list.
  bool option_ahead(std::size_t offset = 0) const {
    return peek(offset).kind == Tok::Ident && peek(offset + 1).kind == Tok::Eq;
  }

  void bind(Query& q, const Ref& r) const {
    if (q.node.empty()) {
      q.node = r.node;
    } else if (q.node != r.node) {
      fail(r.pos, "all references must name the same node ('" + q.node + "' vs '" + r.node + "')");
    }
  }

  Ref ref(bool bare_ok) {
    Ref r;
    r.pos = peek().pos;
    const Token& t = peek();
    if (t.kind != Tok::Ident && t.kind != Tok::Node) fail(t.pos, "expected a node reference");
    ++i_;
    r.node = t.text;
    if (!accept(Tok::Dot)) {
      if (!bare_ok) fail(peek().pos, "expected '.' and a variable name");
      return r;
    }
    r.variable = expect(Tok::Ident, "variable name").text;
    while (peek().kind == Tok::Dot && peek(1).kind == Tok::Ident) {
      i_ += 2;
      r.variable += "." + toks_[i_ - 1].text;
    }
    return r;
  }

  Scalar literal() {
    const Token& t = peek();
    if (t.kind == Tok::Number || t.kind == Tok::String) {
      ++i_;
      return t.value;
    }
    if (t.kind == Tok::Ident && (t.text == "true" || t.text == "false")) {
      ++i_;
      return t.text == "true";
    }
    if (t.kind == Tok::Ident && t.text == "inf") {
      ++i_;
      return kInf;
    }
    fail(t.pos, "expected a value");
  }

  double bound() {
    std::size_t pos = peek().pos;
    Scalar v = literal();
    if (!is_numeric(v)) fail(pos, "interval bounds must be numbers");
    return as_double(v);
  }

  static bool is_cmp(Tok k) { return k == Tok::Lt || k == Tok::Le || k == Tok::Gt || k == Tok::Ge; }

  Constraint constraint(Query& q) {
    bool starts_with_value = peek().kind == Tok::Number || peek().kind == Tok::String ||
                             (peek().kind == Tok::Ident && (peek().text == "true" || peek().text == "false" ||
                                                            peek().text == "inf"));
    if (!starts_with_value) {
      Ref r = ref(false);
      bind(q, r);
      const Token& op = peek();
      if (op.kind == Tok::Eq) {
        ++i_;
        return Constraint::at(r.variable, literal());
      }
      if (!is_cmp(op.kind)) fail(op.pos, "expected a comparison");
      ++i_;
      double v = bound();
      switch (op.kind) {
        case Tok::Lt: return Constraint::within(r.variable, Interval::below(v));
        case Tok::Le: return Constraint::within(r.variable, Interval::at_most(v));
        case Tok::Gt: return Constraint::within(r.variable, Interval::above(v));
        default: return Constraint::within(r.variable, Interval::at_least(v));
      }
    }
    double a = bound();
    const Token& op1 = peek();
    if (!is_cmp(op1.kind)) fail(op1.pos, "expected a comparison");
    ++i_;
    Ref r = ref(false);
    bind(q, r);
    Interval iv;
    bool ascending = op1.kind == Tok::Lt || op1.kind == Tok::Le;
    if (ascending) {
      iv.lo = a;
      iv.lo_closed = op1.kind == Tok::Le;
    } else {
      iv.hi = a;
      iv.hi_closed = op1.kind == Tok::Ge;
    }
    const Token& op2 = peek();
    if (is_cmp(op2.kind)) {
      bool asc2 = op2.kind == Tok::Lt || op2.kind == Tok::Le;
      if (asc2 != ascending) fail(op2.pos, "comparison chain must point one way");
      ++i_;
      double b = bound();
      if (ascending) {
        iv.hi = b;
        iv.hi_closed = op2.kind == Tok::Le;
      } else {
        iv.lo = b;
        iv.lo_closed = op2.kind == Tok::Ge;
      }
    }
    if (!std::isfinite(iv.lo)) iv.lo_closed = false;
    if (!std::isfinite(iv.hi)) iv.hi_closed = false;
    if (iv.empty()) fail(op1.pos, "empty interval");
    return Constraint::within(r.variable, iv);
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// ---------------------------------------------------------------- printer

bool bare_ident(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return s != "true" && s != "false" && s != "inf";
}

std::string node_text(const std::string& node) { return bare_ident(node) ? node : "[" + node + "]"; }

std::string literal_text(const Scalar& v) {
  if (std::holds_alternative<std::string>(v)) {
    std::string out = "\"";
    for (char c : std::get<std::string>(v)) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  return to_display(v);
}

std::string constraint_text(const std::string& node, const Constraint& c) {
  std::string r = node_text(node) + "." + c.variable;
  if (c.point) return r + " = " + literal_text(*c.point);
  const Interval& iv = c.interval;
  bool lo = std::isfinite(iv.lo), hi = std::isfinite(iv.hi);
  if (lo && hi) {
    return format_double(iv.lo) + (iv.lo_closed ? " <= " : " < ") + r + (iv.hi_closed ? " <= " : " < ") +
           format_double(iv.hi);
  }
  if (lo) return r + (iv.lo_closed ? " >= " : " > ") + format_double(iv.lo);
  if (hi) return r + (iv.hi_closed ? " <= " : " < ") + format_double(iv.hi);
  return "-inf < " + r + " < inf";
}

Json constraint_json(const Constraint& c) {
  Json j{{"variable", c.variable}};
  if (c.point) {
    j["point"] = scalar_to_json(*c.point);
  } else {
    j["lo"] = std::isfinite(c.interval.lo) ? Json(c.interval.lo) : Json(nullptr);
    j["hi"] = std::isfinite(c.interval.hi) ? Json(c.interval.hi) : Json(nullptr);
    j["lo_closed"] = c.interval.lo_closed;
    j["hi_closed"] = c.interval.hi_closed;
  }
  return j;
}

Constraint constraint_from_json(const Json& j) {
  std::string v = j.at("variable").get<std::string>();
  if (j.contains("point")) return Constraint::at(v, scalar_from_json(j.at("point")));
  Interval iv;
  if (j.contains("lo") && !j.at("lo").is_null()) iv.lo = j.at("lo").get<double>();
  if (j.contains("hi") && !j.at("hi").is_null()) iv.hi = j.at("hi").get<double>();
  iv.lo_closed = std::isfinite(iv.lo) && j.value("lo_closed", false);
  iv.hi_closed = std::isfinite(iv.hi) && j.value("hi_closed", false);
  if (iv.empty()) throw Error(ErrorCode::InvalidParams, "empty interval on '" + v + "'");
  return Constraint::within(v, iv);
}

QueryKind kind_from_name(const std::string& s) {
  for (auto k : {QueryKind::Probability, QueryKind::Distribution, QueryKind::Sample, QueryKind::Score,
                 QueryKind::Divergence}) {
    if (query_kind_name(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidParams, "unknown query kind '" + s + "'");
}

}  // namespace

std::string_view query_kind_name(QueryKind kind) {
  switch (kind) {
    case QueryKind::Probability: return "probability";
    case QueryKind::Distribution: return "distribution";
    case QueryKind::Sample: return "sample";
    case QueryKind::Score: return "score";
    case QueryKind::Divergence: return "divergence";
  }
  return "probability";
}

bool Query::operator==(const Query& o) const {
  if (kind != o.kind || node != o.node || targets != o.targets || point != o.point || n != o.n || seed != o.seed ||
      other != o.other || event.has_value() != o.event.has_value()) {
    return false;
  }
  if (event && !same_constraint(*event, *o.event)) return false;
  return same_constraints(constraints, o.constraints);
}

Query parse_query(std::string_view text) { return Parser(text).parse(); }

std::string to_string(const Query& q) {
  std::string out;
  std::string node = node_text(q.node);
  auto conds = [&] {
    std::string s;
    for (std::size_t i = 0; i < q.constraints.size(); ++i) {
      s += (i == 0 ? " | " : ", ") + constraint_text(q.node, q.constraints[i]);
    }
    return s;
  };
  switch (q.kind) {
    case QueryKind::Probability:
      out = "P(" + constraint_text(q.node, *q.event) + conds();
      break;
    case QueryKind::Distribution:
      out = "DIST(";
      for (std::size_t i = 0; i < q.targets.size(); ++i) out += (i ? ", " : "") + node + "." + q.targets[i];
      out += conds();
      break;
    case QueryKind::Sample:
      out = "SAMPLE(";
      if (q.targets.empty()) out += node;
      for (std::size_t i = 0; i < q.targets.size(); ++i) out += (i ? ", " : "") + node + "." + q.targets[i];
      out += conds() + ", n=" + std::to_string(q.n);
      break;
    case QueryKind::Score:
      out = "SCORE(";
      for (std::size_t i = 0; i < q.point.size(); ++i) {
        out += (i ? ", " : "") + node + "." + q.point[i].first + " = " + literal_text(q.point[i].second);
      }
      break;
    case QueryKind::Divergence:
      out = "DIV(" + node + ", other=" + literal_text(q.other);
      break;
  }
  if (q.seed) out += ", seed=" + std::to_string(*q.seed);
  return out + ")";
}

Json to_json(const Query& q) {
  Json j{{"text", to_string(q)}, {"kind", query_kind_name(q.kind)}, {"node", q.node}, {"targets", q.targets}};
  Json cs = Json::array();
  for (const auto& c : q.constraints) cs.push_back(constraint_json(c));
  j["constraints"] = cs;
  if (q.event) j["event"] = constraint_json(*q.event);
  if (!q.point.empty()) {
    Json p = Json::array();
    for (const auto& [v, x] : q.point) p.push_back({{"variable", v}, {"value", scalar_to_json(x)}});
    j["point"] = p;
  }
  if (q.kind == QueryKind::Sample) j["n"] = q.n;
  if (q.seed) j["seed"] = *q.seed;
  if (!q.other.empty()) j["other"] = q.other;
  return j;
}

Query query_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidParams, "query must be a JSON object");
  try {
    if (j.contains("query")) {
      Query q = parse_query(j.at("query").get<std::string>());
      if (j.contains("seed")) q.seed = j.at("seed").get<std::uint64_t>();
      return q;
    }
    Query q;
    q.kind = kind_from_name(j.at("kind").get<std::string>());
    q.node = j.at("node").get<std::string>();
    q.targets = j.value("targets", std::vector<std::string>{});
    for (const auto& c : j.value("constraints", Json::array())) q.constraints.push_back(constraint_from_json(c));
    if (j.contains("event")) q.event = constraint_from_json(j.at("event"));
    for (const auto& p : j.value("point", Json::array())) {
      q.point.emplace_back(p.at("variable").get<std::string>(), scalar_from_json(p.at("value")));
    }
    q.n = j.value("n", std::size_t{0});
    if (j.contains("seed")) q.seed = j.at("seed").get<std::uint64_t>();
    q.other = j.value("other", std::string());
    if (q.kind == QueryKind::Probability) {
      if (!q.event) throw Error(ErrorCode::InvalidParams, "probability query needs an event");
      q.targets = {q.event->variable};
    }
    return q;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("malformed query JSON: ") + e.what());
  }
}

}  // namespace psm::inference
