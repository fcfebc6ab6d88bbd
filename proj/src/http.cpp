#include "kgagent/http.hpp"

#include <httplib.h>

#include "kgagent/error.hpp"

namespace kgagent {

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw TransportError("endpoint needs a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body,
                         std::chrono::seconds timeout) {
  auto [base, path] = split_endpoint(endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + endpoint + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError("POST " + endpoint + " returned invalid JSON: " + e.what());
  }
}

}  // namespace kgagent
