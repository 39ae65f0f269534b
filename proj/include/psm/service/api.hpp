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

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "psm/core/error.hpp"
#include "psm/network/network.hpp"
#include "psm/service/bundle.hpp"

namespace httplib {
class Server;
}

namespace psm::service {

struct ApiRequest {
  std::string method;  // GET or POST
  std::string path;
  std::map<std::string, std::string> params;  // query string
  std::string body;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

int http_status(ErrorCode code);

// {"var": value} for points, {"var": {"lo": a, "hi": b}} for open intervals
// ("lo_closed"/"hi_closed" optional). Missing bounds are infinite.
std::vector<density::Constraint> constraints_from_json(const Json& j);

// Observation histograms and the fitted curve over the same 256 bins.
Json node_view(const network::ModelNode& node);

// Read-only handler over one loaded bundle. Requests without a seed get one
// derived from the server seed and a request counter; the seed used is in the
// response metadata.
class Api {
 public:
  using Loader = std::function<Bundle(const std::string&)>;

  Api(Bundle bundle, std::uint64_t seed, Loader loader = load_bundle_path);

  ApiResponse handle(const ApiRequest& req) const;

  const Bundle& bundle() const { return bundle_; }
  const std::string& hash() const { return hash_; }
  std::uint64_t seed() const { return seed_; }

  static Bundle load_bundle_path(const std::string& path) { return load_bundle(path); }

 private:
  std::uint64_t next_seed() const;
  Json meta(std::uint64_t seed) const;

  Bundle bundle_;
  std::string hash_;
  std::uint64_t seed_;
  Loader loader_;
  mutable std::atomic<std::uint64_t> counter_{0};
};

// Routes the API paths of `server` to `api`.
void mount(httplib::Server& server, const Api& api);

}  // namespace psm::service
