#include "kgagent/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "kgagent/jsonl.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

namespace {

constexpr std::array<std::string_view, 9> kNames = {
    "think",          "plan",      "relation_search", "relation_information",
    "neighbor_search", "neighbor_information", "web_search", "web_information",
    "answer"};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// A candidate delimiter "<name>" or "</name>" starting at `pos`.
struct Delim {
  bool closing = false;
  std::string name;
  size_t begin = 0;
  size_t end = 0;  // one past '>'
};

std::optional<Delim> delim_at(std::string_view text, size_t pos) {
  if (pos >= text.size() || text[pos] != '<') return std::nullopt;
  Delim d;
  d.begin = pos;
  size_t i = pos + 1;
  if (i < text.size() && text[i] == '/') {
    d.closing = true;
    ++i;
  }
  if (i >= text.size() || !(std::isalpha(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
    return std::nullopt;
  }
  size_t name_begin = i;
  while (i < text.size() && is_name_char(text[i])) ++i;
  if (i >= text.size() || text[i] != '>') return std::nullopt;
  d.name = std::string(text.substr(name_begin, i - name_begin));
  d.end = i + 1;
  return d;
}

void add_bare_text(std::string_view text, size_t begin, size_t end, bool strict,
                   std::vector<Step>& steps) {
  size_t b = begin, e = end;
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  if (b == e) return;
  if (strict) throw ParseError("STRAY_TEXT", "text outside any tag block", b);
  Step s;
  s.tag = Tag::kThink;
  s.content = std::string(text.substr(b, e - b));
  s.content_span = {b, e};
  s.block_span = {b, e};
  s.implicit = true;
  steps.push_back(std::move(s));
}

}  // namespace

std::string_view tag_name(Tag tag) { return kNames[static_cast<size_t>(tag)]; }

std::optional<Tag> tag_from_name(std::string_view name) {
  for (size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Tag>(i);
  }
  return std::nullopt;
}

bool is_search(Tag tag) {
  return tag == Tag::kRelationSearch || tag == Tag::kNeighborSearch || tag == Tag::kWebSearch;
}

bool is_information(Tag tag) {
  return tag == Tag::kRelationInformation || tag == Tag::kNeighborInformation ||
         tag == Tag::kWebInformation;
}

Tag information_for(Tag search) {
  switch (search) {
    case Tag::kRelationSearch: return Tag::kRelationInformation;
    case Tag::kNeighborSearch: return Tag::kNeighborInformation;
    case Tag::kWebSearch: return Tag::kWebInformation;
    default: throw Error("not a search tag: " + std::string(tag_name(search)));
  }
}

std::string open_delim(Tag tag) { return "<" + std::string(tag_name(tag)) + ">"; }
std::string close_delim(Tag tag) { return "</" + std::string(tag_name(tag)) + ">"; }

size_t Trajectory::count(Tag tag) const {
  return static_cast<size_t>(
      std::count_if(steps.begin(), steps.end(), [tag](const Step& s) { return s.tag == tag; }));
}

const Step* Trajectory::last(Tag tag) const {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (it->tag == tag) return &*it;
  }
  return nullptr;
}

const Step* Trajectory::first(Tag tag) const {
  for (const auto& s : steps) {
    if (s.tag == tag) return &s;
  }
  return nullptr;
}

bool Trajectory::step_equal(const Trajectory& other) const {
  return std::equal(steps.begin(), steps.end(), other.steps.begin(), other.steps.end(),
                    [](const Step& a, const Step& b) { return a.same_as(b); });
}

ParseError::ParseError(std::string code, std::string message, size_t offset)
    : Error(code + " at offset " + std::to_string(offset) + ": " + message),
      code_(std::move(code)),
      offset_(offset) {}

Trajectory parse_trajectory(std::string_view text, std::string_view question_id,
                            ParseOptions options) {
  Trajectory traj;
  traj.question_id = std::string(question_id);
  traj.raw = std::string(text);

  size_t cursor = 0;  // end of the last consumed block
  size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    auto d = delim_at(text, pos);
    if (!d) {
      ++pos;
      continue;
    }
    auto tag = tag_from_name(d->name);
    if (!tag) {
      throw ParseError("UNKNOWN_TAG",
                       "tag <" + d->name + "> is not in the trajectory vocabulary; only the "
                       "defined labels may appear",
                       d->begin);
    }
    if (d->closing) {
      throw ParseError("STRAY_CLOSE", "closing </" + d->name + "> without an opening tag",
                       d->begin);
    }
    add_bare_text(text, cursor, d->begin, options.strict, traj.steps);

    const std::string close = close_delim(*tag);
    size_t content_begin = d->end;
    size_t close_pos = text.find(close, content_begin);
    if (close_pos == std::string_view::npos) {
      throw ParseError("UNCLOSED_TAG", "<" + d->name + "> is never closed", d->begin);
    }
    // Information blocks carry tool output verbatim; every other block must
    // not contain a vocabulary delimiter before its own closing tag.
    if (!is_information(*tag)) {
      size_t inner = text.find('<', content_begin);
      while (inner != std::string_view::npos && inner < close_pos) {
        if (auto nd = delim_at(text, inner)) {
          if (!tag_from_name(nd->name)) {
            throw ParseError("UNKNOWN_TAG",
                             "tag <" + nd->name + "> is not in the trajectory vocabulary", inner);
          }
          throw ParseError("NESTED_TAG",
                           "<" + nd->name + "> inside <" + std::string(tag_name(*tag)) + ">",
                           inner);
        }
        inner = text.find('<', inner + 1);
      }
    }
    Step s;
    s.tag = *tag;
    s.content = std::string(text.substr(content_begin, close_pos - content_begin));
    s.content_span = {content_begin, close_pos};
    s.block_span = {d->begin, close_pos + close.size()};
    traj.steps.push_back(std::move(s));
    cursor = close_pos + close.size();
    pos = cursor;
  }
  add_bare_text(text, cursor, text.size(), options.strict, traj.steps);
  return traj;
}

bool FormatReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

FormatReport validate_format(const Trajectory& traj) {
  FormatReport report;
  auto flag = [&](std::string code, std::string message, size_t offset) {
    report.violations.push_back({std::move(code), std::move(message), offset});
  };

  size_t plans = traj.count(Tag::kPlan);
  if (plans != 1) {
    const Step* second = nullptr;
    if (plans > 1) {
      size_t seen = 0;
      for (const auto& s : traj.steps) {
        if (s.tag == Tag::kPlan && ++seen == 2) second = &s;
      }
    }
    flag("PLAN_COUNT", "expected exactly one plan block, found " + std::to_string(plans),
         second ? second->block_span.begin : 0);
  }
  if (const Step* plan = traj.first(Tag::kPlan)) {
    for (const auto& s : traj.steps) {
      if (&s == plan) break;
      if (is_search(s.tag)) {
        flag("PLAN_NOT_FIRST_ACTION",
             std::string(tag_name(s.tag)) + " issued before the plan block", s.block_span.begin);
        break;
      }
    }
  }
  size_t answers = traj.count(Tag::kAnswer);
  if (answers != 1) {
    flag("ANSWER_COUNT", "expected exactly one answer block, found " + std::to_string(answers),
         traj.raw.size());
  } else if (traj.steps.back().tag != Tag::kAnswer) {
    flag("ANSWER_COUNT", "answer block is not the final step", traj.last(Tag::kAnswer)->block_span.begin);
  }
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const Step& s = traj.steps[i];
    if (!is_information(s.tag)) continue;
    bool paired = i > 0 && is_search(traj.steps[i - 1].tag) &&
                  information_for(traj.steps[i - 1].tag) == s.tag;
    if (!paired) {
      flag("ORPHAN_INFO",
           std::string(tag_name(s.tag)) + " not immediately preceded by its search block",
           s.block_span.begin);
    }
  }
  report.valid = report.violations.empty();
  return report;
}

FormatReport check_format(std::string_view text, ParseOptions options) {
  try {
    return validate_format(parse_trajectory(text, "", options));
  } catch (const ParseError& e) {
    FormatReport r;
    r.valid = false;
    r.violations.push_back({e.code(), e.what(), e.offset()});
    return r;
  }
}

std::string render_step(const Step& step) {
  return open_delim(step.tag) + step.content + close_delim(step.tag);
}

std::string render_trajectory(const Trajectory& traj) {
  std::string out;
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    if (i) out.push_back('\n');
    out += render_step(traj.steps[i]);
  }
  return out;
}

std::vector<Span> retrieval_mask(const Trajectory& traj) {
  std::vector<Span> spans;
  for (const auto& s : traj.steps) {
    if (is_information(s.tag)) spans.push_back(s.block_span);
  }
  return spans;
}

std::vector<std::string> parse_answer_list(std::string_view content) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string cur;
  auto flush = [&] {
    std::string n = normalize(cur);
    cur.clear();
    if (!n.empty() && seen.insert(n).second) out.push_back(std::move(n));
  };
  for (char c : content) {
    if (c == ';' || c == '|') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::vector<std::string> predicted_answers(const Trajectory& traj) {
  const Step* ans = traj.last(Tag::kAnswer);
  return ans ? parse_answer_list(ans->content) : std::vector<std::string>{};
}

std::string concat_contents(const Trajectory& traj, Tag tag) {
  std::vector<std::string> parts;
  for (const auto& s : traj.steps) {
    if (s.tag == tag) parts.push_back(s.content);
  }
  return join(parts, "\n");
}

std::vector<TrajectoryRecord> load_trajectory_file(const std::filesystem::path& path) {
  std::vector<TrajectoryRecord> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ": bad trajectory record: " + e.what());
    }
  }
  return out;
}

void save_trajectory_file(const std::filesystem::path& path,
                          const std::vector<TrajectoryRecord>& records) {
  std::vector<json> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({{"id", r.id}, {"text", r.text}});
  write_jsonl(path, out);
}

}  // namespace kgagent
