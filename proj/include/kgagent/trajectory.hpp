#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgagent/error.hpp"

namespace kgagent {

enum class Tag {
  kThink,
  kPlan,
  kRelationSearch,
  kRelationInformation,
  kNeighborSearch,
  kNeighborInformation,
  kWebSearch,
  kWebInformation,
  kAnswer,
};

inline constexpr std::array<Tag, 9> kAllTags = {
    Tag::kThink,         Tag::kPlan,      Tag::kRelationSearch, Tag::kRelationInformation,
    Tag::kNeighborSearch, Tag::kNeighborInformation, Tag::kWebSearch, Tag::kWebInformation,
    Tag::kAnswer};

std::string_view tag_name(Tag tag);
std::optional<Tag> tag_from_name(std::string_view name);

bool is_search(Tag tag);
bool is_information(Tag tag);
/// relation_search -> relation_information, etc.
Tag information_for(Tag search);

std::string open_delim(Tag tag);
std::string close_delim(Tag tag);

/// Half-open character range [begin, end) into the trajectory text.
struct Span {
  size_t begin = 0;
  size_t end = 0;

  size_t length() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct Step {
  Tag tag = Tag::kThink;
  std::string content;
  Span content_span;  // content only
  Span block_span;    // content plus delimiters
  bool implicit = false;  // bare text promoted to think

  /// Tag and content equality; spans are positional and not compared.
  bool same_as(const Step& other) const { return tag == other.tag && content == other.content; }
};

struct Trajectory {
  std::string question_id;
  std::vector<Step> steps;
  std::string raw;

  size_t count(Tag tag) const;
  const Step* last(Tag tag) const;
  const Step* first(Tag tag) const;
  bool step_equal(const Trajectory& other) const;
};

/// Parse failure: UNKNOWN_TAG, UNCLOSED_TAG, NESTED_TAG, STRAY_CLOSE or STRAY_TEXT.
class ParseError : public Error {
 public:
  ParseError(std::string code, std::string message, size_t offset);
  const std::string& code() const { return code_; }
  size_t offset() const { return offset_; }

 private:
  std::string code_;
  size_t offset_;
};

struct ParseOptions {
  /// Reject non-whitespace text outside tag blocks instead of treating it as think.
  bool strict = false;
};

Trajectory parse_trajectory(std::string_view text, std::string_view question_id,
                            ParseOptions options = {});

struct Violation {
  std::string code;
  std::string message;
  size_t offset = 0;
};

struct FormatReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(std::string_view code) const;
};

FormatReport validate_format(const Trajectory& traj);

/// Parse + validate in one go; parse errors become a single violation
/// carrying the parse error code.
FormatReport check_format(std::string_view text, ParseOptions options = {});

/// "<tag>content</tag>" per step, newline separated.
std::string render_step(const Step& step);
std::string render_trajectory(const Trajectory& traj);

/// Block spans of every information step, sorted and disjoint.
std::vector<Span> retrieval_mask(const Trajectory& traj);

/// Splits answer content on ';' or '|', normalizes, drops empties and
/// duplicates, keeps first-seen order.
std::vector<std::string> parse_answer_list(std::string_view content);

/// Normalized answers of the last answer block; empty if there is none.
std::vector<std::string> predicted_answers(const Trajectory& traj);

/// Concatenated contents of all steps with `tag`, newline joined.
std::string concat_contents(const Trajectory& traj, Tag tag);

// Trajectory file: JSON-lines {"id", "text"}.
struct TrajectoryRecord {
  std::string id;
  std::string text;
};

std::vector<TrajectoryRecord> load_trajectory_file(const std::filesystem::path& path);
void save_trajectory_file(const std::filesystem::path& path,
                          const std::vector<TrajectoryRecord>& records);

}  // namespace kgagent
