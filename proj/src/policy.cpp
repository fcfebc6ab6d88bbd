#include "kgagent/policy.hpp"

#include <algorithm>

#include "kgagent/error.hpp"
#include "kgagent/http.hpp"
#include "kgagent/jsonl.hpp"
#include "kgagent/text.hpp"

namespace kgagent {

AnswerSet PlanExecution::final_answers() const {
  auto it = bindings.find(final_id);
  return it == bindings.end() ? AnswerSet{} : it->second;
}

std::vector<std::string> PlanExecution::final_display() const {
  std::vector<std::string> out;
  for (const auto& a : final_answers()) {
    auto it = display.find(a);
    out.push_back(it == display.end() ? a : it->second);
  }
  return out;
}

PlanExecution execute_plan(const Plan& plan, const KnowledgeGraph& kg) {
  PlanExecution exec;
  for (const auto& id : execution_order(plan)) {
    const SubQuestion& sq = *plan.find(id);
    if (const auto* ans = std::get_if<AnsExpr>(&sq.expr)) {
      std::vector<std::string> heads;
      if (ans->head.is_ref) {
        for (const auto& a : exec.bindings.at(ans->head.text)) heads.push_back(exec.display.at(a));
      } else {
        heads.push_back(ans->head.text);
      }
      AnswerSet found;
      for (const auto& h : heads) {
        for (const auto& e : kg.resolve(h)) {
          for (const auto& t : kg.tails(e, ans->relation)) {
            std::string shown = kg.display_name(t);
            std::string key = normalize(shown);
            found.insert(key);
            exec.display.emplace(key, shown);
          }
        }
      }
      exec.bindings[id] = std::move(found);
    } else {
      exec.bindings[id] = eval_expr(sq.expr, exec.bindings);
    }
    exec.final_id = id;
  }
  return exec;
}

std::optional<std::string> last_block_content(std::string_view conversation, Tag tag) {
  const std::string open = open_delim(tag);
  const std::string close = close_delim(tag);
  size_t start = conversation.rfind(open);
  if (start == std::string_view::npos) return std::nullopt;
  start += open.size();
  size_t end = conversation.find(close, start);
  if (end == std::string_view::npos) return std::nullopt;
  return std::string(conversation.substr(start, end - start));
}

// ---------------------------------------------------------------------------
// ScriptedOraclePolicy

ScriptedOraclePolicy::ScriptedOraclePolicy(const KnowledgeGraph& reference, const QAExample& qa)
    : reference_(reference), plan_text_(trim(qa.plan)) {
  if (plan_text_.empty()) throw Error("question " + qa.id + " has no recorded plan");
  plan_ = parse_plan(plan_text_);
  order_ = execution_order(plan_);
  expected_ = execute_plan(plan_, reference_);
}

void ScriptedOraclePolicy::reset(const QuestionContext&) {
  phase_ = Phase::kStart;
  sub_index_ = 0;
  current_ = nullptr;
  heads_.clear();
  head_index_ = 0;
  chosen_relation_.clear();
  results_.clear();
  bindings_.clear();
  display_.clear();
}

std::string ScriptedOraclePolicy::next_segment(std::string_view conversation) {
  std::string tail = trim(conversation);
  if (tail.size() >= kForcedAnswerDirective.size() &&
      tail.compare(tail.size() - kForcedAnswerDirective.size(), std::string::npos,
                   kForcedAnswerDirective) == 0) {
    phase_ = Phase::kDone;
    return "<answer>" + join(expected_.final_display(), "; ") + "</answer>";
  }
  return advance(conversation);
}

std::vector<std::string> ScriptedOraclePolicy::expected_tails(const std::string& head_text) const {
  std::vector<std::string> out;
  for (const auto& e : reference_.resolve(head_text)) {
    for (const auto& t : reference_.tails(e, current_->relation)) out.push_back(t);
  }
  return out;
}

void ScriptedOraclePolicy::finish_head() {
  if (++head_index_ < heads_.size()) {
    phase_ = Phase::kRelationSearch;
    return;
  }
  bindings_[order_[sub_index_]] = results_;
  ++sub_index_;
  phase_ = Phase::kNextSubQuestion;
}

std::string ScriptedOraclePolicy::advance(std::string_view conversation) {
  while (true) {
    switch (phase_) {
      case Phase::kStart:
        phase_ = Phase::kNextSubQuestion;
        return "<think>Decompose the question into ordered sub-questions.</think>\n<plan>\n" +
               plan_text_ + "\n</plan>";

      case Phase::kNextSubQuestion: {
        if (sub_index_ >= order_.size()) {
          phase_ = Phase::kDone;
          std::vector<std::string> shown;
          for (const auto& a : bindings_[order_.back()]) {
            auto it = display_.find(a);
            shown.push_back(it == display_.end() ? a : it->second);
          }
          return "<think>All sub-questions are resolved.</think>\n<answer>" + join(shown, "; ") +
                 "</answer>";
        }
        const SubQuestion& sq = *plan_.find(order_[sub_index_]);
        current_ = std::get_if<AnsExpr>(&sq.expr);
        if (!current_) {
          bindings_[sq.id] = eval_expr(sq.expr, bindings_);
          ++sub_index_;
          continue;
        }
        heads_.clear();
        if (current_->head.is_ref) {
          for (const auto& a : bindings_[current_->head.text]) {
            auto it = display_.find(a);
            heads_.push_back(it == display_.end() ? a : it->second);
          }
        } else {
          heads_.push_back(current_->head.text);
        }
        head_index_ = 0;
        results_.clear();
        if (heads_.empty()) {
          bindings_[sq.id] = {};
          ++sub_index_;
          continue;
        }
        phase_ = Phase::kRelationSearch;
        continue;
      }

      case Phase::kRelationSearch:
        phase_ = Phase::kAwaitRelations;
        return "<think>" + order_[sub_index_] + ": look up relations of " + heads_[head_index_] +
               ".</think>\n<relation_search>" + heads_[head_index_] + " | " + current_->relation +
               "</relation_search>";

      case Phase::kAwaitRelations: {
        chosen_relation_ = current_->relation;
        auto listed = last_block_content(conversation, Tag::kRelationInformation).value_or("");
        for (const auto& r : split(listed, ',')) {
          if (to_lower(trim(r)) == to_lower(current_->relation)) {
            chosen_relation_ = trim(r);
            break;
          }
        }
        phase_ = Phase::kAwaitNeighbors;
        return "<think>The relation " + chosen_relation_ + " fits best.</think>\n<neighbor_search>" +
               heads_[head_index_] + " | " + chosen_relation_ + "</neighbor_search>";
      }

      case Phase::kAwaitNeighbors: {
        auto found = last_block_content(conversation, Tag::kNeighborInformation).value_or("");
        if (is_kg_sentinel(found) || trim(found) == kMalformedToolCall || trim(found).empty()) {
          phase_ = Phase::kAwaitWeb;
          return "<think>The graph has no answer for this hop; searching the web.</think>\n"
                 "<web_search>" +
                 heads_[head_index_] + " | " + chosen_relation_ + "</web_search>";
        }
        for (const auto& part : split(found, ';')) {
          std::string shown = trim(part);
          std::string key = normalize(shown);
          if (key.empty()) continue;
          results_.insert(key);
          display_.emplace(key, shown);
        }
        finish_head();
        continue;
      }

      case Phase::kAwaitWeb: {
        std::string docs =
            normalize(last_block_content(conversation, Tag::kWebInformation).value_or(""));
        for (const auto& t : expected_tails(heads_[head_index_])) {
          const auto aliases = reference_.aliases(t);
          bool mentioned = std::any_of(aliases.begin(), aliases.end(), [&](const std::string& a) {
            return contains_phrase(docs, normalize(a));
          });
          if (!mentioned) continue;
          std::string shown = reference_.display_name(t);
          std::string key = normalize(shown);
          results_.insert(key);
          display_.emplace(key, shown);
        }
        finish_head();
        continue;
      }

      case Phase::kDone:
        return {};
    }
  }
}

// ---------------------------------------------------------------------------
// RemotePolicy

std::string RemotePolicy::next_segment(std::string_view conversation) {
  json res = post_json(endpoint_, {{"conversation", std::string(conversation)},
                                   {"stop_tags", stop_tags()}});
  try {
    return res.at("segment").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed policy response: ") + e.what());
  }
}

}  // namespace kgagent
