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


#include "psm/service/bundle.hpp"

#include <fstream>
#include <sstream>

#include "psm/core/error.hpp"
#include "psm/core/hash.hpp"

namespace psm::service {

std::string Bundle::hash() const { return hex64(fnv1a64(to_json(*this).dump())); }

Json to_json(const Bundle& b) {
  return {{"manifest", {{"format", kBundleFormat}, {"version", kBundleVersion}, {"entries", {"provenance", "network"}}}},
          {"provenance",
           {{"model_hash", b.provenance.model_hash},
            {"trace_hash", b.provenance.trace_hash},
            {"seed", b.provenance.seed},
            {"config", network::config_to_json(b.provenance.config)}}},
          {"network", network::to_json(b.net)}};
}

Bundle bundle_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("manifest") || !j["manifest"].is_object() ||
      j["manifest"].value("format", "") != kBundleFormat) {
    throw Error(ErrorCode::SchemaMismatch, "not a model bundle (missing psm-bundle manifest)");
  }
  const Json& m = j["manifest"];
  if (!m.contains("version") || !m["version"].is_number_integer() || m["version"].get<int>() != kBundleVersion) {
    throw Error(ErrorCode::BundleVersion, "bundle format version " + (m.contains("version") ? m["version"].dump() : "?") +
                                              " is not supported; this build reads version " +
                                              std::to_string(kBundleVersion));
  }
  Bundle b;
  try {
    const Json& p = j.at("provenance");
    b.provenance.model_hash = p.at("model_hash").get<std::string>();
    b.provenance.trace_hash = p.at("trace_hash").get<std::string>();
    b.provenance.seed = p.at("seed").get<std::uint64_t>();
    b.provenance.config = network::config_from_json(p.at("config"));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("bad bundle provenance: ") + e.what());
  }
  if (!j.contains("network")) throw Error(ErrorCode::SchemaMismatch, "bundle has no network");
  b.net = network::network_from_json(j["network"]);
  return b;
}

void save_bundle(const std::filesystem::path& path, const Bundle& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << to_json(b).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

Bundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "'" + path.string() + "' is not JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace psm::service
