#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kgagent {

/// Canonical form used for alias matching and answer comparison:
/// ASCII lowercase, trimmed, internal whitespace collapsed to one space,
/// surrounding punctuation stripped.
std::string normalize(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

/// Lowercase word tokens, split on whitespace and on '.', '_' separators.
std::vector<std::string> word_tokens(std::string_view text);

size_t edit_distance(std::string_view a, std::string_view b);

/// True if `phrase` occurs in `haystack` bounded on both sides by a
/// non-alphanumeric character or the string edge. Both inputs are expected
/// to be normalized already.
bool contains_phrase(std::string_view haystack, std::string_view phrase);

std::vector<std::string> split(std::string_view text, char sep);

/// "Iranian_rial" -> "Iranian rial"
std::string id_to_text(std::string_view entity_id);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace kgagent
