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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "psm/core/hash.hpp"
#include "psm/minilang/interpreter.hpp"
#include "psm/minilang/parser.hpp"
#include "psm/network/network.hpp"
#include "psm/structure/static_model.hpp"
#include "psm/trace/assemble.hpp"
#include "test_util.hpp"

namespace psm::testing {

struct Pipeline {
  ml0::Program program;
  structure::StaticModel model;
  trace::TraceLog log;
  trace::RowsByNode rows;
  network::ModelNetwork net;
};

// Fitted networks are cached as JSON under the test binary directory, keyed by
// the inputs, so that each test process does not refit them.
inline Pipeline run_pipeline(const std::string& corpus_file, std::uint64_t iterations, std::uint64_t seed,
                             const density::FitConfig& cfg = {}) {
  Pipeline p;
  std::string source = read_corpus(corpus_file);
  p.program = ml0::parse(source);
  p.model = structure::extract(p.program);
  ml0::ExecOptions opt;
  opt.seed = seed;
  opt.iterations = iterations;
  p.log = ml0::execute(p.program, opt);
  p.rows = trace::assemble(p.log, p.model);
  Json key{{"source", source}, {"iterations", iterations}, {"seed", seed}, {"kmax", cfg.kmax},
           {"restarts", cfg.restarts}, {"tolerance", cfg.tolerance}, {"min_samples", cfg.min_samples},
           {"bic_patience", cfg.bic_patience}, {"max_iterations", cfg.max_iterations}};
  std::filesystem::path cache = std::filesystem::path(PSM_TEST_CACHE_DIR) /
                                ("net-" + std::to_string(fnv1a64(key.dump())) + ".json");
  if (std::ifstream in(cache); in) {
    try {
      p.net = network::network_from_json(Json::parse(in));
      return p;
    } catch (const std::exception&) {
    }
  }
  p.net = network::build(p.model);
  network::fit_all(p.net, p.rows, cfg, seed);
  std::filesystem::create_directories(cache.parent_path());
  auto tmp = cache;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    out << network::to_json(p.net).dump();
  }
  std::filesystem::rename(tmp, cache);
  return p;
}

// Fitted corpus network shared by the tests of one binary.
inline const Pipeline& corpus_pipeline() {
  static const Pipeline p = run_pipeline("nutrition_advisor.ml0", 10000, 7);
  return p;
}

}  // namespace psm::testing
