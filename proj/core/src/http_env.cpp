// SPDX-License-Identifier: Apache-2.0
#include "toolvoc/http_env.hpp"

#include <map>
#include <mutex>
#include <semaphore>
#include <string>

#include <httplib.h>

#include "json_io.hpp"
#include "toolvoc/error.hpp"

namespace toolvoc {

using detail::json;

namespace {

std::string percent_encode(const std::string& value) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(value.size());
  for (unsigned char c : value) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xf];
    }
  }
  return out;
}

std::string value_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

struct HttpToolEnvironment::Impl {
  Impl(size_t max_concurrency, int timeout_seconds)
      : timeout(timeout_seconds),
        gate(static_cast<ptrdiff_t>(max_concurrency)) {}

  int timeout;
  std::counting_semaphore<> gate;
  std::mutex mu;
  std::map<uint32_t, HttpEndpoint> endpoints;
};

HttpToolEnvironment::HttpToolEnvironment(size_t max_concurrency,
                                         int timeout_seconds)
    : impl_(std::make_unique<Impl>(max_concurrency == 0 ? 1 : max_concurrency,
                                   timeout_seconds)) {}

HttpToolEnvironment::~HttpToolEnvironment() = default;

void HttpToolEnvironment::register_endpoint(ToolId tool,
                                            HttpEndpoint endpoint) {
  if (endpoint.url.rfind("http://", 0) != 0)
    throw InvalidArgument("endpoint url must start with http://");
  if (endpoint.method.empty()) endpoint.method = "GET";
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->endpoints[tool.ordinal] = std::move(endpoint);
}

ToolResponse HttpToolEnvironment::call(ToolId tool,
                                       const std::string& params_json) {
  HttpEndpoint endpoint;
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    auto it = impl_->endpoints.find(tool.ordinal);
    if (it == impl_->endpoints.end())
      return {false, "", "tool_error"};  // nothing is wired to this tool
    endpoint = it->second;
  }

  json params = json::parse(params_json, nullptr, false);
  if (params.is_discarded() || !params.is_object())
    return {false, "", "tool_error"};

  // Fill {param} placeholders from the arguments; the rest travel as query
  // string or body depending on the verb.
  std::string url = endpoint.url;
  json leftovers = json::object();
  for (const auto& [key, value] : params.items()) {
    const std::string placeholder = "{" + key + "}";
    size_t pos = url.find(placeholder);
    if (pos != std::string::npos) {
      url.replace(pos, placeholder.size(), percent_encode(value_to_string(value)));
    } else {
      leftovers[key] = value;
    }
  }
  if (url.find('{') != std::string::npos)
    return {false, "", "tool_error"};  // an unfilled placeholder remains

  // Split http://host[:port]/path.
  std::string rest = url.substr(7);
  size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string host = hostport;
  int port = 80;
  if (size_t colon = hostport.rfind(':'); colon != std::string::npos) {
    host = hostport.substr(0, colon);
    port = std::stoi(hostport.substr(colon + 1));
  }

  impl_->gate.acquire();
  httplib::Client client(host, port);
  client.set_connection_timeout(impl_->timeout, 0);
  client.set_read_timeout(impl_->timeout, 0);
  client.set_write_timeout(impl_->timeout, 0);

  httplib::Result res;
  if (endpoint.method == "POST" || endpoint.method == "PUT") {
    const std::string body = leftovers.dump();
    res = endpoint.method == "POST"
              ? client.Post(path, body, "application/json")
              : client.Put(path, body, "application/json");
  } else {
    std::string query;
    for (const auto& [key, value] : leftovers.items()) {
      query += query.empty() ? '?' : '&';
      query += percent_encode(key);
      query += '=';
      query += percent_encode(value_to_string(value));
    }
    if (endpoint.method == "DELETE") res = client.Delete(path + query);
    else res = client.Get(path + query);
  }
  impl_->gate.release();

  if (!res) return {false, "", "network_error"};
  if (res->status < 200 || res->status >= 300)
    return {false, res->body, "tool_error"};
  return {true, res->body, ""};
}

}  // namespace toolvoc
