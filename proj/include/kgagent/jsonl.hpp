#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace kgagent {

using json = nlohmann::json;

/// Reads one JSON document per non-blank line. Errors name the line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

}  // namespace kgagent
