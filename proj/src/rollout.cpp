#include "kgagent/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "kgagent/text.hpp"

namespace kgagent {

namespace {

/// Tool output must never be able to close or open a block.
std::string sanitize_tool_output(std::string text) {
  for (Tag t : kAllTags) {
    for (const std::string& d : {open_delim(t), close_delim(t)}) {
      size_t pos;
      while ((pos = text.find(d)) != std::string::npos) text.erase(pos, d.size());
    }
  }
  return text;
}

Step info_step(Tag tag, std::string content) {
  Step s;
  s.tag = tag;
  s.content = sanitize_tool_output(std::move(content));
  return s;
}

/// Cuts `segment` right after the earliest stop delimiter.
std::string truncate_at_stop(std::string segment) {
  size_t cut = std::string::npos;
  for (const auto& stop : stop_tags()) {
    size_t pos = segment.find(stop);
    if (pos != std::string::npos) cut = std::min(cut, pos + stop.size());
  }
  if (cut != std::string::npos) segment.resize(cut);
  return segment;
}

void append_piece(std::string& text, std::string_view piece) {
  if (!text.empty()) text.push_back('\n');
  text.append(piece);
}

}  // namespace

QuestionContext make_context(const QAExample& qa, const KnowledgeGraph& kg) {
  QuestionContext ctx{qa.id, qa.question, {}};
  for (const auto& e : qa.topic_entities) ctx.topic_entities.push_back(kg.display_name(e));
  return ctx;
}

std::vector<std::string> stop_tags() {
  return {close_delim(Tag::kPlan), close_delim(Tag::kRelationSearch),
          close_delim(Tag::kNeighborSearch), close_delim(Tag::kWebSearch),
          close_delim(Tag::kAnswer)};
}

std::string build_prompt(const QuestionContext& context) {
  std::string p =
      "Answer the question by reasoning over a knowledge graph, falling back to web search when "
      "the graph lacks a fact.\n"
      "Think inside <think></think>. First write one plan inside <plan></plan>, one sub-question "
      "per line as 'S1: Ans(type | relation(head, ?))', combining sub-answers with inter(...), "
      "union(...) or negation(...; ...).\n"
      "Tools (content is 'head | relation'):\n"
      "  <relation_search>entity | hypothetical relation</relation_search> lists candidate "
      "relations inside <relation_information></relation_information>.\n"
      "  <neighbor_search>entity | relation</neighbor_search> returns tail entities inside "
      "<neighbor_information></neighbor_information>, or '" +
      std::string(kKgSentinel) +
      "'.\n"
      "  <web_search>entity | relation</web_search> returns documents inside "
      "<web_information></web_information>.\n"
      "Give the final answer inside <answer></answer>, separating multiple answers with ';'.\n";
  p += "Question: " + context.question + "\n";
  if (!context.topic_entities.empty()) {
    p += "Topic entities: " + join(context.topic_entities, "; ") + "\n";
  }
  return p;
}

std::optional<ToolCall> parse_tool_call(std::string_view content) {
  auto bar = content.rfind('|');
  if (bar == std::string_view::npos) return std::nullopt;
  ToolCall call{trim(content.substr(0, bar)), trim(content.substr(bar + 1))};
  if (call.head.empty() || call.relation.empty()) return std::nullopt;
  return call;
}

Step dispatch_action(const Step& step, const KnowledgeGraph& kg, const WebTool& web,
                     const RolloutConfig& cfg) {
  if (!is_search(step.tag)) {
    return info_step(Tag::kRelationInformation, std::string(kMalformedToolCall));
  }
  const Tag reply = information_for(step.tag);
  auto call = parse_tool_call(step.content);
  if (!call) return info_step(reply, std::string(kMalformedToolCall));

  switch (step.tag) {
    case Tag::kRelationSearch: {
      std::set<std::string> candidates;
      for (const auto& id : kg.resolve(call->head)) {
        const auto& rels = kg.relations_of(id);
        candidates.insert(rels.begin(), rels.end());
      }
      auto ranked =
          rank_relations(candidates, call->relation, cfg.top_k_relations, TokenJaccardSimilarity{});
      return info_step(reply, join(ranked, ", "));
    }
    case Tag::kNeighborSearch: {
      NeighborAnswer merged;
      std::set<std::string> seen;
      for (const auto& id : kg.resolve(call->head)) {
        auto ans = neighbor_search(kg, id, call->relation);
        for (size_t i = 0; i < ans.tails.size(); ++i) {
          if (seen.insert(ans.tails[i]).second) {
            merged.tails.push_back(ans.tails[i]);
            merged.texts.push_back(ans.texts[i]);
          }
        }
      }
      return info_step(reply, merged.render());
    }
    default: {
      std::string query = normalize(call->head + " " + call->relation);
      try {
        auto snippets = web.search(query, cfg.top_k_docs);
        if (static_cast<int>(snippets.size()) > cfg.top_k_docs) snippets.resize(cfg.top_k_docs);
        if (snippets.empty()) return info_step(reply, std::string(kNoDocuments));
        return info_step(reply, join(snippets, "\n"));
      } catch (const std::exception&) {
        return info_step(reply, std::string(kWebUnavailable));
      }
    }
  }
}

Step force_final_answer(Policy& policy, std::string_view conversation) {
  std::string convo(conversation);
  convo += "\n";
  convo += kForcedAnswerDirective;
  convo += "\n";
  Step answer;
  answer.tag = Tag::kAnswer;
  std::string segment;
  try {
    segment = policy.next_segment(convo);
  } catch (const std::exception&) {
    return answer;
  }
  try {
    auto piece = parse_trajectory(segment, "");
    if (const Step* s = piece.first(Tag::kAnswer)) answer.content = s->content;
  } catch (const ParseError&) {
  }
  return answer;
}

Trajectory run_rollout(Policy& policy, const KnowledgeGraph& kg, const WebTool& web,
                       const QAExample& question, const RolloutConfig& cfg) {
  const QuestionContext ctx = make_context(question, kg);
  const ParseOptions opts{cfg.strict_format};
  policy.reset(ctx);
  const std::string prompt = build_prompt(ctx);

  std::string text;
  int iterations = 0;
  // Bounds policies that never emit an action.
  const int max_segments = 4 * std::max(cfg.max_iterations, 1) + 16;
  bool answered = false;
  for (int segments = 0; segments < max_segments; ++segments) {
    std::string segment = truncate_at_stop(policy.next_segment(prompt + text));
    Trajectory piece;
    try {
      piece = parse_trajectory(segment, question.id, opts);
    } catch (const ParseError& e) {
      if (cfg.strict_format) {
        Trajectory partial;
        try {
          partial = parse_trajectory(text, question.id, opts);
        } catch (const ParseError&) {
          partial.question_id = question.id;
          partial.raw = text;
        }
        throw RolloutError(std::string("unparseable policy segment: ") + e.what(), partial);
      }
      break;
    }
    if (piece.steps.empty()) break;  // end of output
    append_piece(text, trim(segment));

    const Step& last = piece.steps.back();
    if (last.tag == Tag::kAnswer) {
      answered = true;
      break;
    }
    if (is_search(last.tag)) {
      append_piece(text, render_step(dispatch_action(last, kg, web, cfg)));
      if (++iterations >= cfg.max_iterations) break;
    }
  }
  if (!answered) append_piece(text, render_step(force_final_answer(policy, prompt + text)));
  return parse_trajectory(text, question.id, opts);
}

std::vector<Trajectory> run_rollouts(const PolicyFactory& make_policy, const KnowledgeGraph& kg,
                                     const WebTool& web, const std::vector<QAExample>& questions,
                                     const RolloutConfig& cfg, unsigned jobs) {
  std::vector<Trajectory> out(questions.size());
  std::vector<std::exception_ptr> errors(questions.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < questions.size(); i = next++) {
      try {
        auto policy = make_policy(questions[i]);
        out[i] = run_rollout(*policy, kg, web, questions[i], cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(questions.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace kgagent
