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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psm/core/error.hpp"
#include "psm/core/scalar.hpp"
#include "psm/density/density.hpp"
#include "psm/network/network.hpp"

namespace psm::inference {

enum class QueryKind { Probability, Distribution, Sample, Score, Divergence };
std::string_view query_kind_name(QueryKind kind);

struct Query {
  QueryKind kind = QueryKind::Probability;
  std::string node;
  std::vector<std::string> targets;  // probability: one; sample: empty means all
  std::vector<density::Constraint> constraints;
  std::optional<density::Constraint> event;  // probability: the target event; score: unused
  std::vector<std::pair<std::string, Scalar>> point;  // score
  std::size_t n = 0;                                  // sample
  std::optional<std::uint64_t> seed;
  std::string other;  // divergence: comparison bundle reference

  bool operator==(const Query& o) const;
};

class QuerySyntaxError : public Error {
 public:
  QuerySyntaxError(std::size_t position, const std::string& message)
      : Error(ErrorCode::QuerySyntaxError, "position " + std::to_string(position) + ": " + message),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Textual grammar, for example
//   P(Person.weight > 80)
//   P(Person.weight > 80 | 169 < Person.height < 170)
//   DIST(Person.weight | 169 < Person.height < 170)
//   SAMPLE(Person, n=100, seed=3)
//   SCORE(Person.weight = -10)
//   DIV(Person, other="old.psm")
// Node ids containing dots are bracketed: [NutritionAdvisor.advice].return
Query parse_query(std::string_view text);
std::string to_string(const Query& q);  // canonical; parse_query(to_string(q)) == q

Json to_json(const Query& q);
Query query_from_json(const Json& j);  // {"query": "<text>"} or the structured form

struct VariableSummary {
  std::string variable;
  network::Histogram histogram;
  std::optional<double> mean, sd, q05, median, q95;  // ordered variables
  Scalar mode;
};

struct QueryResult {
  Query query;
  std::optional<double> value;  // probability, score, divergence
  std::vector<VariableSummary> distributions;
  std::vector<std::string> columns;  // sample
  std::vector<std::vector<Scalar>> rows;
  // provenance
  std::size_t samples = 0;
  bool low_confidence = false;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
};

struct RunOptions {
  std::uint64_t seed = 0;  // used when the query has none
  bool allow_low_confidence = true;
  const network::ModelNetwork* other = nullptr;  // divergence target
};

// Conditions first, then marginalizes to the targets.
QueryResult run(const network::ModelNetwork& net, const Query& q, const RunOptions& options = {});

// 256-bin summary of one variable of a density.
VariableSummary summarize(const density::Density& d, const std::string& variable, std::uint64_t seed);

Json to_json(const QueryResult& r);

}  // namespace psm::inference
