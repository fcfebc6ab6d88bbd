#include "kgagent/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "kgagent/error.hpp"
#include "kgagent/http.hpp"
#include "kgagent/jsonl.hpp"
#include "kgagent/plan.hpp"
#include "kgagent/reward.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

// ---------------------------------------------------------------------------
// Judges

int RuleJudge::score(const QuestionContext& question, std::string_view plan_text) const {
  Plan plan;
  try {
    plan = parse_plan(plan_text);
  } catch (const PlanError&) {
    return 0;
  }
  if (plan.sub_questions.empty()) return 0;

  std::set<std::string> heads;
  for (const auto& sq : plan.sub_questions) {
    if (const auto* ans = std::get_if<AnsExpr>(&sq.expr); ans && !ans->head.is_ref) {
      heads.insert(normalize(ans->head.text));
    }
  }
  for (const auto& topic : question.topic_entities) {
    if (heads.count(normalize(topic)) == 0) return 0;
  }
  const std::string& sink = plan.sub_questions.back().id;
  for (const auto& sq : plan.sub_questions) {
    auto refs = references(sq.expr);
    if (std::find(refs.begin(), refs.end(), sink) != refs.end()) return 0;
  }
  return 1;
}

int RemoteJudge::score(const QuestionContext& question, std::string_view plan) const {
  json res = post_json(endpoint_, {{"question", question.question}, {"plan", std::string(plan)}});
  if (!res.is_object() || !res.contains("score") || !res["score"].is_number_integer()) {
    throw TransportError("malformed judge response: " + res.dump());
  }
  int s = res["score"].get<int>();
  if (s != 0 && s != 1) throw TransportError("judge score must be 0 or 1, got " + std::to_string(s));
  return s;
}

int judge_plan(std::string_view plan_text, const QuestionContext& question, const Judge& judge) {
  return judge.score(question, plan_text);
}

// ---------------------------------------------------------------------------
// Filter

bool FilterVerdict::failed(std::string_view code) const {
  return std::find(failed_checks.begin(), failed_checks.end(), code) != failed_checks.end();
}

FilterVerdict filter_trajectory(std::string_view text, const QAExample& qa, Coverage coverage,
                                const Judge& judge, const QuestionContext& context,
                                FilterOptions options) {
  FilterVerdict v;
  Trajectory traj;
  try {
    traj = parse_trajectory(text, qa.id);
  } catch (const ParseError&) {
    v.failed_checks.push_back("FORMAT");
    return v;
  }
  if (!validate_format(traj).valid) v.failed_checks.push_back("FORMAT");

  auto pred = predicted_answers(traj);
  if (answer_f1(AnswerSet(pred.begin(), pred.end()), qa.answers) < options.answer_threshold) {
    v.failed_checks.push_back("ANSWER");
  }

  const bool used_web = traj.count(Tag::kWebSearch) > 0;
  if (coverage == Coverage::CKG) {
    if (used_web) v.failed_checks.push_back("RETRIEVAL_CKG_WEB_PRESENT");
    if (graph_reward(traj, qa.answers) == 0) v.failed_checks.push_back("RETRIEVAL_CKG_GRAPH_MISS");
  } else {
    if (!used_web) v.failed_checks.push_back("RETRIEVAL_IKG_WEB_ABSENT");
    if (web_reward(traj, qa.answers) == 0) v.failed_checks.push_back("RETRIEVAL_IKG_WEB_MISS");
  }

  const Step* plan = traj.first(Tag::kPlan);
  if (judge_plan(plan ? std::string_view(plan->content) : std::string_view{}, context, judge) == 0) {
    v.failed_checks.push_back("PLAN_JUDGE");
  }
  v.keep = v.failed_checks.empty();
  return v;
}

namespace {

json spans_to_json(const std::vector<Span>& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back({s.begin, s.end});
  return out;
}

}  // namespace

void save_sft(const std::filesystem::path& path, const std::vector<SftRecord>& records) {
  std::vector<json> out;
  for (const auto& r : records) {
    out.push_back({{"id", r.id},
                   {"prompt", r.prompt},
                   {"completion", r.completion},
                   {"masked_spans", spans_to_json(r.masked_spans)}});
  }
  write_jsonl(path, out);
}

// ---------------------------------------------------------------------------
// Metrics

double hits_at_1(const std::vector<Trajectory>& trajs, const std::vector<QAExample>& qa,
                 const WarningSink& warn) {
  if (qa.empty()) throw Error("hits@1 over an empty question set");
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : trajs) by_id.emplace(t.question_id, &t);
  size_t hits = 0;
  for (const auto& q : qa) {
    auto it = by_id.find(q.id);
    if (it == by_id.end()) {
      if (warn) warn("no trajectory for question " + q.id + "; counted as a miss");
      continue;
    }
    auto pred = predicted_answers(*it->second);
    if (pred.empty()) continue;
    bool hit = false;
    for (const auto& aliases : q.answers) {
      for (const auto& a : aliases) hit = hit || normalize(a) == pred.front();
    }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(qa.size());
}

double web_search_ratio(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw Error("web search ratio over no trajectories");
  auto with_web = std::count_if(trajs.begin(), trajs.end(),
                                [](const Trajectory& t) { return t.count(Tag::kWebSearch) > 0; });
  return static_cast<double>(with_web) / static_cast<double>(trajs.size());
}

double web_calls_per_tool_call(const std::vector<Trajectory>& trajs) {
  size_t web = 0, calls = 0;
  for (const auto& t : trajs) {
    for (const auto& s : t.steps) {
      if (!is_search(s.tag)) continue;
      ++calls;
      if (s.tag == Tag::kWebSearch) ++web;
    }
  }
  return calls == 0 ? 0.0 : static_cast<double>(web) / static_cast<double>(calls);
}

EvalReport evaluate(const std::vector<Trajectory>& trajs, const std::vector<QAExample>& qa,
                    const WarningSink& warn) {
  EvalReport r;
  r.n_questions = qa.size();
  r.hits_at_1 = hits_at_1(trajs, qa, warn);
  r.web_search_ratio = web_search_ratio(trajs);
  r.web_calls_per_tool_call = web_calls_per_tool_call(trajs);
  return r;
}

void save_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  write_json(path, {{"hits_at_1", report.hits_at_1},
                    {"web_search_ratio", report.web_search_ratio},
                    {"web_calls_per_tool_call", report.web_calls_per_tool_call},
                    {"n_questions", report.n_questions}});
}

void save_mask_file(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  std::vector<json> out;
  for (const auto& t : trajs) {
    out.push_back({{"id", t.question_id}, {"masked_spans", spans_to_json(retrieval_mask(t))}});
  }
  write_jsonl(path, out);
}

}  // namespace kgagent
