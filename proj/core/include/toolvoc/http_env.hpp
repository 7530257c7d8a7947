// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "toolvoc/agent.hpp"
#include "toolvoc/registry.hpp"

namespace toolvoc {

// One HTTP endpoint backing a tool. `url_template` may contain {param}
// placeholders; matching parameters are substituted into the path and the
// rest travel as query string (GET/DELETE) or JSON body (POST/PUT).
struct HttpEndpoint {
  std::string url;     // http://host:port/path/{param}
  std::string method;  // GET | POST | PUT | DELETE, defaults to GET
};

// Tool environment that performs real HTTP calls via a bounded number of
// concurrent connections. Transport failures and non-2xx statuses map to
// network_error / tool_error feedback rather than exceptions: the agent
// loop treats a failed call as a feedback turn, not a crash.
class HttpToolEnvironment : public ToolEnvironment {
 public:
  explicit HttpToolEnvironment(size_t max_concurrency = 4,
                               int timeout_seconds = 10);
  ~HttpToolEnvironment() override;

  void register_endpoint(ToolId tool, HttpEndpoint endpoint);
  ToolResponse call(ToolId tool, const std::string& params_json) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace toolvoc
