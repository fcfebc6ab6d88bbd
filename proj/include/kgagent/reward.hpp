#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgagent/kg_store.hpp"
#include "kgagent/plan.hpp"
#include "kgagent/trajectory.hpp"

namespace kgagent {

inline constexpr double kAccuracyFloor = 0.1;
inline constexpr double kShapingReward = 0.1;
inline constexpr double kRetrievalPenalty = -0.1;
inline constexpr double kAdvantageEpsilon = 1e-8;
inline constexpr int kDefaultGroupSize = 8;

/// Set F1 between normalized predictions and gold alias sets. A prediction
/// matches a gold answer when it equals any of its aliases after normalization.
double answer_f1(const AnswerSet& predicted, const GoldAnswers& gold);

/// 1 iff every gold answer has an alias occurring as a phrase in `observed`.
bool covers_all_answers(std::string_view observed, const GoldAnswers& gold);

struct AccuracyReward {
  bool format_ok = false;
  double r_ans = 0.0;
  double r_acc = 0.0;
};

AccuracyReward accuracy_reward(const Trajectory& traj, const GoldAnswers& gold);

/// Concatenated neighbor_information / web_information text.
std::string graph_observation(const Trajectory& traj);
std::string web_observation(const Trajectory& traj);

int graph_reward(const Trajectory& traj, const GoldAnswers& gold);
int web_reward(const Trajectory& traj, const GoldAnswers& gold);

/// Case order: accuracy, then the retrieval penalty, then shaping, then zero.
/// Throws when the coverage label is missing.
double overall_reward(double r_acc, int r_graph, int r_web, std::optional<Coverage> coverage);

struct RewardBreakdown {
  bool format_ok = false;
  double r_ans = 0.0;
  double r_acc = 0.0;
  int r_graph = 0;
  int r_web = 0;
  double r_over = 0.0;
  std::string o_graph;
  std::string o_web;
  Coverage coverage = Coverage::CKG;
};

RewardBreakdown score_trajectory(const Trajectory& traj, const GoldAnswers& gold,
                                 std::optional<Coverage> coverage);

/// (r - mean) / (population std + eps); all-equal groups give all zeros.
std::vector<double> group_advantages(std::span<const double> rewards);

// Score file record: {"id", "format_ok", "r_ans", "R_acc", "R_graph", "R_web", "R_over", "coverage"}.
struct ScoreRecord {
  std::string id;
  RewardBreakdown reward;
};

void save_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores);
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);

struct AdvantageGroup {
  std::string question_id;
  std::vector<std::string> members;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// Groups score records by question id (the part of "id" before '#'),
/// chunked into groups of at most `group_size` in file order.
std::vector<AdvantageGroup> compute_advantage_groups(const std::vector<ScoreRecord>& scores,
                                                     int group_size = kDefaultGroupSize);

void save_advantages(const std::filesystem::path& path, const std::vector<AdvantageGroup>& groups);

/// "q01#3" -> "q01"
std::string base_question_id(std::string_view rollout_id);

}  // namespace kgagent
