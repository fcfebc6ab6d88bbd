#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgagent/kg_store.hpp"
#include "kgagent/plan.hpp"
#include "kgagent/rollout.hpp"

namespace kgagent {

/// Answers of a plan executed directly against a graph, with the display
/// text of every normalized answer.
struct PlanExecution {
  Binding bindings;
  std::map<std::string, std::string> display;  // normalized -> display text
  std::string final_id;

  AnswerSet final_answers() const;
  std::vector<std::string> final_display() const;
};

/// Runs every sub-question of `plan` against `kg`; Ans heads that reference a
/// sub-question fan out over its answers and union the results.
PlanExecution execute_plan(const Plan& plan, const KnowledgeGraph& kg);

/// Replays the question's recorded plan through the tools. Relation choice is
/// greedy: the planned relation when the tool lists it. On the miss sentinel
/// it issues one web search for that hop and keeps the expected tails (from
/// `reference`, the complete graph) that the snippets mention.
class ScriptedOraclePolicy final : public Policy {
 public:
  ScriptedOraclePolicy(const KnowledgeGraph& reference, const QAExample& qa);

  void reset(const QuestionContext& context) override;
  std::string next_segment(std::string_view conversation) override;

 private:
  enum class Phase { kStart, kNextSubQuestion, kRelationSearch, kAwaitRelations, kAwaitNeighbors,
                     kAwaitWeb, kDone };

  std::string advance(std::string_view conversation);
  void finish_head();
  std::vector<std::string> expected_tails(const std::string& head_text) const;

  const KnowledgeGraph& reference_;
  std::string plan_text_;
  Plan plan_;
  std::vector<std::string> order_;
  PlanExecution expected_;

  Phase phase_ = Phase::kStart;
  size_t sub_index_ = 0;
  const AnsExpr* current_ = nullptr;
  std::vector<std::string> heads_;
  size_t head_index_ = 0;
  std::string chosen_relation_;
  AnswerSet results_;
  Binding bindings_;
  std::map<std::string, std::string> display_;
};

/// Always emits nothing.
class NullPolicy final : public Policy {
 public:
  void reset(const QuestionContext&) override {}
  std::string next_segment(std::string_view) override { return {}; }
};

/// Returns scripted segments in order, then empty output.
class ReplayPolicy final : public Policy {
 public:
  explicit ReplayPolicy(std::vector<std::string> segments) : segments_(std::move(segments)) {}
  void reset(const QuestionContext&) override { next_ = 0; }
  std::string next_segment(std::string_view) override {
    return next_ < segments_.size() ? segments_[next_++] : std::string{};
  }

 private:
  std::vector<std::string> segments_;
  size_t next_ = 0;
};

/// Chat-style endpoint: POST {"conversation", "stop_tags"} -> {"segment"}.
class RemotePolicy final : public Policy {
 public:
  explicit RemotePolicy(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  void reset(const QuestionContext&) override {}
  std::string next_segment(std::string_view conversation) override;

 private:
  std::string endpoint_;
};

/// Content of the last `tag` block in `conversation`, if any.
std::optional<std::string> last_block_content(std::string_view conversation, Tag tag);

}  // namespace kgagent
