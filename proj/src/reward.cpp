#include "kgagent/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "kgagent/jsonl.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

namespace {

std::vector<std::vector<std::string>> normalized_gold(const GoldAnswers& gold) {
  std::vector<std::vector<std::string>> out;
  out.reserve(gold.size());
  for (const auto& aliases : gold) {
    std::vector<std::string> n;
    for (const auto& a : aliases) {
      auto v = normalize(a);
      if (!v.empty()) n.push_back(std::move(v));
    }
    out.push_back(std::move(n));
  }
  return out;
}

}  // namespace

double answer_f1(const AnswerSet& predicted, const GoldAnswers& gold) {
  if (predicted.empty() || gold.empty()) return 0.0;
  const auto golds = normalized_gold(gold);
  auto matches = [](const std::string& p, const std::vector<std::string>& aliases) {
    return std::find(aliases.begin(), aliases.end(), p) != aliases.end();
  };
  size_t matched_pred = 0;
  for (const auto& p : predicted) {
    std::string np = normalize(p);
    if (std::any_of(golds.begin(), golds.end(), [&](const auto& g) { return matches(np, g); })) {
      ++matched_pred;
    }
  }
  size_t matched_gold = 0;
  for (const auto& g : golds) {
    if (std::any_of(predicted.begin(), predicted.end(),
                    [&](const std::string& p) { return matches(normalize(p), g); })) {
      ++matched_gold;
    }
  }
  double precision = static_cast<double>(matched_pred) / static_cast<double>(predicted.size());
  double recall = static_cast<double>(matched_gold) / static_cast<double>(golds.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

bool covers_all_answers(std::string_view observed, const GoldAnswers& gold) {
  if (gold.empty()) return false;
  const std::string text = normalize(observed);
  for (const auto& aliases : normalized_gold(gold)) {
    bool present = std::any_of(aliases.begin(), aliases.end(),
                               [&](const std::string& a) { return contains_phrase(text, a); });
    if (!present) return false;
  }
  return true;
}

AccuracyReward accuracy_reward(const Trajectory& traj, const GoldAnswers& gold) {
  AccuracyReward out;
  out.format_ok = validate_format(traj).valid;
  auto pred = predicted_answers(traj);
  out.r_ans = answer_f1(AnswerSet(pred.begin(), pred.end()), gold);
  out.r_acc = out.format_ok ? std::max(kAccuracyFloor, out.r_ans) : 0.0;
  return out;
}

std::string graph_observation(const Trajectory& traj) {
  return concat_contents(traj, Tag::kNeighborInformation);
}

std::string web_observation(const Trajectory& traj) {
  return concat_contents(traj, Tag::kWebInformation);
}

int graph_reward(const Trajectory& traj, const GoldAnswers& gold) {
  return covers_all_answers(graph_observation(traj), gold) ? 1 : 0;
}

int web_reward(const Trajectory& traj, const GoldAnswers& gold) {
  return covers_all_answers(web_observation(traj), gold) ? 1 : 0;
}

double overall_reward(double r_acc, int r_graph, int r_web, std::optional<Coverage> coverage) {
  if (!coverage) throw Error("overall reward needs a CKG/IKG coverage label");
  if (r_acc > 0.0) return r_acc;
  bool bypassed_graph = *coverage == Coverage::CKG && r_web > 0;
  bool missed_web = *coverage == Coverage::IKG && r_web == 0;
  if (bypassed_graph || missed_web) return kRetrievalPenalty;
  if (r_graph > 0 || r_web > 0) return kShapingReward;
  return 0.0;
}

RewardBreakdown score_trajectory(const Trajectory& traj, const GoldAnswers& gold,
                                 std::optional<Coverage> coverage) {
  if (!coverage) throw Error("no coverage label for " + traj.question_id);
  RewardBreakdown out;
  auto acc = accuracy_reward(traj, gold);
  out.format_ok = acc.format_ok;
  out.r_ans = acc.r_ans;
  out.r_acc = acc.r_acc;
  out.o_graph = graph_observation(traj);
  out.o_web = web_observation(traj);
  out.r_graph = covers_all_answers(out.o_graph, gold) ? 1 : 0;
  out.r_web = covers_all_answers(out.o_web, gold) ? 1 : 0;
  out.coverage = *coverage;
  out.r_over = overall_reward(out.r_acc, out.r_graph, out.r_web, coverage);
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw Error("advantage group is empty");
  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double stddev = std::sqrt(ss / n);
  for (size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / (stddev + kAdvantageEpsilon);
  }
  return out;
}

std::string base_question_id(std::string_view rollout_id) {
  return std::string(rollout_id.substr(0, rollout_id.find('#')));
}

void save_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores) {
  std::vector<json> records;
  for (const auto& s : scores) {
    const auto& r = s.reward;
    records.push_back({{"id", s.id},
                       {"format_ok", r.format_ok},
                       {"r_ans", r.r_ans},
                       {"R_acc", r.r_acc},
                       {"R_graph", r.r_graph},
                       {"R_web", r.r_web},
                       {"R_over", r.r_over},
                       {"coverage", to_string(r.coverage)}});
  }
  write_jsonl(path, records);
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
  std::vector<ScoreRecord> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      ScoreRecord s;
      s.id = j.at("id").get<std::string>();
      s.reward.format_ok = j.at("format_ok").get<bool>();
      s.reward.r_ans = j.at("r_ans").get<double>();
      s.reward.r_acc = j.at("R_acc").get<double>();
      s.reward.r_graph = j.at("R_graph").get<int>();
      s.reward.r_web = j.at("R_web").get<int>();
      s.reward.r_over = j.at("R_over").get<double>();
      s.reward.coverage = parse_coverage(j.at("coverage").get<std::string>());
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ": bad score record: " + e.what());
    }
  }
  return out;
}

std::vector<AdvantageGroup> compute_advantage_groups(const std::vector<ScoreRecord>& scores,
                                                     int group_size) {
  if (group_size < 1) throw Error("group size must be positive");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ScoreRecord*>> by_question;
  for (const auto& s : scores) {
    auto q = base_question_id(s.id);
    auto [it, fresh] = by_question.try_emplace(q);
    if (fresh) order.push_back(q);
    it->second.push_back(&s);
  }
  std::vector<AdvantageGroup> groups;
  for (const auto& q : order) {
    const auto& members = by_question[q];
    for (size_t start = 0; start < members.size(); start += static_cast<size_t>(group_size)) {
      size_t end = std::min(members.size(), start + static_cast<size_t>(group_size));
      AdvantageGroup g;
      g.question_id = q;
      for (size_t i = start; i < end; ++i) {
        g.members.push_back(members[i]->id);
        g.rewards.push_back(members[i]->reward.r_over);
      }
      g.advantages = group_advantages(g.rewards);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

void save_advantages(const std::filesystem::path& path, const std::vector<AdvantageGroup>& groups) {
  std::vector<json> records;
  for (const auto& g : groups) {
    records.push_back({{"id", g.question_id},
                       {"group", g.members},
                       {"rewards", g.rewards},
                       {"advantages", g.advantages}});
  }
  write_jsonl(path, records);
}

}  // namespace kgagent
