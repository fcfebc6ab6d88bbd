#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "kgagent/kg_store.hpp"
#include "kgagent/rollout.hpp"
#include "kgagent/trajectory.hpp"

namespace kgagent {

/// Scores a plan block 1 (reasonable) or 0.
class Judge {
 public:
  virtual ~Judge() = default;
  /// Throws TransportError when a remote judge fails or answers malformed.
  virtual int score(const QuestionContext& question, std::string_view plan) const = 0;
};

/// 1 iff the plan parses, every topic entity is the literal head of some Ans,
/// and the last sub-question is referenced by no other.
class RuleJudge final : public Judge {
 public:
  int score(const QuestionContext& question, std::string_view plan) const override;
};

/// POST {"question", "plan"} -> {"score": 0|1}.
class RemoteJudge final : public Judge {
 public:
  explicit RemoteJudge(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  int score(const QuestionContext& question, std::string_view plan) const override;

 private:
  std::string endpoint_;
};

int judge_plan(std::string_view plan_text, const QuestionContext& question, const Judge& judge);

struct FilterOptions {
  /// Minimum answer F1 to pass ANSWER; 1.0 demands an exact set match.
  double answer_threshold = 1.0;
};

struct FilterVerdict {
  bool keep = false;
  std::vector<std::string> failed_checks;

  bool failed(std::string_view code) const;
};

/// Two-stage SFT trajectory filter: format, then answer, retrieval and plan
/// correctness. Text that does not parse fails FORMAT only.
FilterVerdict filter_trajectory(std::string_view text, const QAExample& qa, Coverage coverage,
                                const Judge& judge, const QuestionContext& context,
                                FilterOptions options = {});

/// One SFT record per kept trajectory: {"prompt", "completion", "masked_spans"}.
struct SftRecord {
  std::string id;
  std::string prompt;
  std::string completion;
  std::vector<Span> masked_spans;
};

void save_sft(const std::filesystem::path& path, const std::vector<SftRecord>& records);

struct EvalReport {
  double hits_at_1 = 0.0;
  double web_search_ratio = 0.0;
  double web_calls_per_tool_call = 0.0;
  size_t n_questions = 0;
};

using WarningSink = std::function<void(const std::string&)>;

/// Fraction of questions whose first predicted answer equals a gold alias.
/// Questions without a trajectory count as misses and raise a warning.
double hits_at_1(const std::vector<Trajectory>& trajs, const std::vector<QAExample>& qa,
                 const WarningSink& warn = {});

/// Fraction of trajectories with at least one web_search block.
double web_search_ratio(const std::vector<Trajectory>& trajs);

/// web_search blocks over all search blocks (0 when there are none).
double web_calls_per_tool_call(const std::vector<Trajectory>& trajs);

EvalReport evaluate(const std::vector<Trajectory>& trajs, const std::vector<QAExample>& qa,
                    const WarningSink& warn = {});

void save_eval_report(const std::filesystem::path& path, const EvalReport& report);

void save_mask_file(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

}  // namespace kgagent
