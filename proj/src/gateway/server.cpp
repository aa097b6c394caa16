// Copyright 2026 The Prefix Authors.
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

#include "prefix/gateway/gateway.hpp"

#include "prefix/common/error.hpp"

// After the Eigen headers: resolv.h defines a _res macro.
#include <httplib.h>

namespace prefix::gateway {

void serve(Gateway& gateway, const std::string& host, int port) {
  httplib::Server server;
  auto forward = [&gateway](const httplib::Request& req, httplib::Response& res) {
    const Response r = gateway.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace prefix::gateway
