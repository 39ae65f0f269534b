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
#include <string>

#include "psm/core/scalar.hpp"
#include "psm/density/density.hpp"
#include "psm/network/network.hpp"

namespace psm::service {

inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleFormat = "psm-bundle";

struct Provenance {
  std::string model_hash;  // static model JSON
  std::string trace_hash;  // trace log text
  std::uint64_t seed = 0;
  density::FitConfig config;
  bool operator==(const Provenance&) const = default;
};

struct Bundle {
  Provenance provenance;
  network::ModelNetwork net;

  // Hash of the serialized bundle; identifies it in API responses.
  std::string hash() const;
};

// {"manifest": {...}, "provenance": {...}, "network": {...}}
Json to_json(const Bundle& b);
Bundle bundle_from_json(const Json& j);  // BundleVersion, SchemaMismatch

void save_bundle(const std::filesystem::path& path, const Bundle& b);
Bundle load_bundle(const std::filesystem::path& path);  // IoError, BundleVersion, SchemaMismatch

}  // namespace psm::service
