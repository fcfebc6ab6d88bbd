#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace kgagent {

/// POSTs `body` as JSON to `endpoint` ("http://host:port/path") and returns
/// the parsed JSON response. Throws TransportError on connection failure,
/// non-2xx status, or an unparseable body.
nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body,
                         std::chrono::seconds timeout = std::chrono::seconds(60));

}  // namespace kgagent
