#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kgagent/kg_store.hpp"
#include "kgagent/trajectory.hpp"
#include "kgagent/web.hpp"

namespace kgagent {

struct RolloutConfig {
  int max_iterations = 10;  // tool calls of any kind
  int top_k_relations = kDefaultRelationTopK;
  int top_k_docs = 3;
  uint64_t seed = 0;
  bool strict_format = false;
};

struct QuestionContext {
  std::string id;
  std::string question;
  std::vector<std::string> topic_entities;  // display texts
};

QuestionContext make_context(const QAExample& qa, const KnowledgeGraph& kg);

/// The generating side of a rollout. One instance serves one rollout at a time.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const QuestionContext& context) = 0;
  /// Text up to and including the next closing action delimiter, or whatever
  /// remains of the output (possibly empty) if no action follows.
  virtual std::string next_segment(std::string_view conversation) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(const QAExample&)>;

inline constexpr std::string_view kForcedAnswerDirective =
    "Iteration limit reached. Provide your final answer now inside <answer></answer> using your "
    "own knowledge.";
inline constexpr std::string_view kWebUnavailable = "web tool unavailable";
inline constexpr std::string_view kMalformedToolCall = "malformed tool call";
inline constexpr std::string_view kNoDocuments = "No relevant documents found.";

/// Closing delimiters at which a policy segment must stop.
std::vector<std::string> stop_tags();

/// System instructions plus the question; the conversation prefix handed to policies.
std::string build_prompt(const QuestionContext& context);

/// "head | relation" tool-call content.
struct ToolCall {
  std::string head;
  std::string relation;
};
std::optional<ToolCall> parse_tool_call(std::string_view content);

/// Executes a search step and returns the matching information step. Never
/// throws: malformed calls and web transport failures become in-band text.
Step dispatch_action(const Step& step, const KnowledgeGraph& kg, const WebTool& web,
                     const RolloutConfig& cfg);

/// Appends the forced-answer directive, asks for one more segment and keeps
/// only its answer block; synthesizes an empty answer when there is none.
Step force_final_answer(Policy& policy, std::string_view conversation);

class RolloutError : public Error {
 public:
  RolloutError(const std::string& message, Trajectory partial)
      : Error(message), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

Trajectory run_rollout(Policy& policy, const KnowledgeGraph& kg, const WebTool& web,
                       const QAExample& question, const RolloutConfig& cfg);

/// Runs one rollout per question on up to `jobs` threads; output order
/// follows `questions`.
std::vector<Trajectory> run_rollouts(const PolicyFactory& make_policy, const KnowledgeGraph& kg,
                                     const WebTool& web, const std::vector<QAExample>& questions,
                                     const RolloutConfig& cfg, unsigned jobs = 1);

}  // namespace kgagent
