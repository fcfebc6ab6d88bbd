#include "kgagent/plan.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "kgagent/text.hpp"

namespace kgagent {

namespace {

bool is_id(std::string_view s) {
  if (s.size() < 2 || s[0] != 'S') return false;
  return std::all_of(s.begin() + 1, s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

/// Matches "name(" case-insensitively at the start of `s` and returns the
/// text between that parenthesis and the final ')'.
std::optional<std::string> call_args(std::string_view s, std::string_view name) {
  if (s.size() < name.size() + 2) return std::nullopt;
  if (to_lower(s.substr(0, name.size())) != name) return std::nullopt;
  std::string rest = trim(s.substr(name.size()));
  if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')') return std::nullopt;
  return rest.substr(1, rest.size() - 2);
}

std::vector<std::string> id_list(std::string_view text, size_t line, std::string_view what) {
  std::vector<std::string> out;
  for (auto& part : split(text, ',')) {
    std::string id = trim(part);
    if (!is_id(id)) {
      throw PlanError(line, std::string(what) + " argument '" + id + "' is not a sub-question id");
    }
    out.push_back(id);
  }
  return out;
}

Expr parse_expr(std::string_view text, size_t line) {
  std::string s = trim(text);
  if (auto inner = call_args(s, "ans")) {
    auto bar = inner->find('|');
    if (bar == std::string::npos) throw PlanError(line, "Ans needs 'type | relation(head, ?)'");
    AnsExpr ans;
    ans.target_type = trim(inner->substr(0, bar));
    std::string call = trim(inner->substr(bar + 1));
    auto open = call.find('(');
    if (open == std::string::npos || call.back() != ')') {
      throw PlanError(line, "Ans query must look like relation(head, ?)");
    }
    ans.relation = trim(call.substr(0, open));
    std::string args = call.substr(open + 1, call.size() - open - 2);
    auto comma = args.rfind(',');
    if (comma == std::string::npos || trim(args.substr(comma + 1)) != "?") {
      throw PlanError(line, "Ans query must end with ', ?)'");
    }
    ans.head.text = trim(args.substr(0, comma));
    ans.head.is_ref = is_id(ans.head.text);
    if (ans.relation.empty() || ans.head.text.empty()) {
      throw PlanError(line, "Ans query has an empty relation or head");
    }
    return ans;
  }
  if (auto inner = call_args(s, "inter")) {
    auto args = id_list(*inner, line, "inter");
    if (args.size() < 2) throw PlanError(line, "inter needs at least two arguments");
    return InterExpr{std::move(args)};
  }
  if (auto inner = call_args(s, "union")) {
    auto args = id_list(*inner, line, "union");
    if (args.size() < 2) throw PlanError(line, "union needs at least two arguments");
    return UnionExpr{std::move(args)};
  }
  if (auto inner = call_args(s, "negation")) {
    auto semi = inner->find(';');
    NegationExpr neg;
    neg.primary = trim(inner->substr(0, semi));
    if (!is_id(neg.primary)) throw PlanError(line, "negation primary must be a sub-question id");
    // An empty subtrahend list is allowed and leaves the primary unchanged.
    if (semi != std::string::npos && !trim(inner->substr(semi + 1)).empty()) {
      neg.subtracted = id_list(inner->substr(semi + 1), line, "negation");
    }
    return neg;
  }
  if (is_id(s)) return RefExpr{s};
  throw PlanError(line, "unrecognised expression '" + s + "'");
}

std::optional<std::vector<std::string>> try_order(const Plan& plan) {
  std::vector<std::string> order;
  std::vector<bool> done(plan.sub_questions.size(), false);
  std::set<std::string> emitted;
  while (order.size() < plan.sub_questions.size()) {
    bool progressed = false;
    for (size_t i = 0; i < plan.sub_questions.size(); ++i) {
      if (done[i]) continue;
      const auto deps = references(plan.sub_questions[i].expr);
      bool ready = std::all_of(deps.begin(), deps.end(),
                               [&](const std::string& d) { return emitted.count(d) != 0; });
      if (!ready) continue;
      done[i] = true;
      emitted.insert(plan.sub_questions[i].id);
      order.push_back(plan.sub_questions[i].id);
      progressed = true;
      break;
    }
    if (!progressed) return std::nullopt;
  }
  return order;
}

}  // namespace

std::vector<std::string> references(const Expr& expr) {
  return std::visit(
      [](const auto& e) -> std::vector<std::string> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, AnsExpr>) {
          return e.head.is_ref ? std::vector<std::string>{e.head.text} : std::vector<std::string>{};
        } else if constexpr (std::is_same_v<T, NegationExpr>) {
          std::vector<std::string> out{e.primary};
          out.insert(out.end(), e.subtracted.begin(), e.subtracted.end());
          return out;
        } else if constexpr (std::is_same_v<T, RefExpr>) {
          return {e.id};
        } else {
          return e.args;
        }
      },
      expr);
}

std::string render_expr(const Expr& expr) {
  return std::visit(
      [](const auto& e) -> std::string {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, AnsExpr>) {
          return "Ans(" + e.target_type + " | " + e.relation + "(" + e.head.text + ", ?))";
        } else if constexpr (std::is_same_v<T, InterExpr>) {
          return "inter(" + join(e.args, ", ") + ")";
        } else if constexpr (std::is_same_v<T, UnionExpr>) {
          return "union(" + join(e.args, ", ") + ")";
        } else if constexpr (std::is_same_v<T, NegationExpr>) {
          return "negation(" + e.primary + "; " + join(e.subtracted, ", ") + ")";
        } else {
          return e.id;
        }
      },
      expr);
}

const SubQuestion* Plan::find(std::string_view id) const {
  for (const auto& sq : sub_questions) {
    if (sq.id == id) return &sq;
  }
  return nullptr;
}

std::vector<std::string> Plan::dependencies(std::string_view id) const {
  const SubQuestion* sq = find(id);
  return sq ? references(sq->expr) : std::vector<std::string>{};
}

std::string Plan::render() const {
  std::string out;
  for (const auto& sq : sub_questions) {
    out += sq.id + ": ";
    if (!sq.text.empty()) out += "\"" + sq.text + "\" ";
    out += render_expr(sq.expr) + "\n";
  }
  return out;
}

PlanError::PlanError(size_t line, const std::string& message)
    : Error("plan line " + std::to_string(line) + ": " + message), line_(line) {}

Plan parse_plan(std::string_view content) {
  Plan plan;
  std::vector<size_t> lines;
  size_t line_no = 0;
  for (const auto& raw : split(content, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw PlanError(line_no, "expected 'ID: EXPR'");
    SubQuestion sq;
    sq.id = trim(line.substr(0, colon));
    if (!is_id(sq.id)) throw PlanError(line_no, "'" + sq.id + "' is not a sub-question id (S1, S2, ...)");
    if (plan.find(sq.id)) throw PlanError(line_no, "duplicate sub-question id " + sq.id);
    std::string rest = trim(line.substr(colon + 1));
    if (!rest.empty() && rest.front() == '"') {
      auto close = rest.find('"', 1);
      if (close == std::string::npos) throw PlanError(line_no, "unterminated sub-question text");
      sq.text = rest.substr(1, close - 1);
      rest = trim(rest.substr(close + 1));
    }
    sq.expr = parse_expr(rest, line_no);
    plan.sub_questions.push_back(std::move(sq));
    lines.push_back(line_no);
  }
  for (size_t i = 0; i < plan.sub_questions.size(); ++i) {
    const auto& sq = plan.sub_questions[i];
    for (const auto& ref : references(sq.expr)) {
      if (ref == sq.id) throw PlanError(lines[i], sq.id + " depends on itself");
      if (!plan.find(ref)) throw PlanError(lines[i], "reference to undeclared id " + ref);
    }
  }
  if (!try_order(plan)) {
    // Report the first sub-question that can never become ready.
    std::set<std::string> emitted;
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (const auto& sq : plan.sub_questions) {
        if (emitted.count(sq.id)) continue;
        auto deps = references(sq.expr);
        if (std::all_of(deps.begin(), deps.end(), [&](auto& d) { return emitted.count(d) != 0; })) {
          emitted.insert(sq.id);
          progressed = true;
        }
      }
    }
    for (size_t i = 0; i < plan.sub_questions.size(); ++i) {
      if (!emitted.count(plan.sub_questions[i].id)) {
        throw PlanError(lines[i], "dependency cycle through " + plan.sub_questions[i].id);
      }
    }
  }
  return plan;
}

std::vector<std::string> execution_order(const Plan& plan) {
  auto order = try_order(plan);
  if (!order) throw Error("plan has a dependency cycle or an undeclared reference");
  return *order;
}

AnswerSet eval_expr(const Expr& expr, const Binding& bindings) {
  auto bound = [&](const std::string& id) -> const AnswerSet& {
    auto it = bindings.find(id);
    if (it == bindings.end()) throw Error("unbound sub-question reference " + id);
    return it->second;
  };
  return std::visit(
      [&](const auto& e) -> AnswerSet {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, AnsExpr>) {
          throw Error("Ans expressions are resolved by tool calls, not evaluated");
        } else if constexpr (std::is_same_v<T, InterExpr>) {
          if (e.args.empty()) return {};
          AnswerSet acc = bound(e.args.front());
          for (size_t i = 1; i < e.args.size(); ++i) {
            const AnswerSet& next = bound(e.args[i]);
            AnswerSet kept;
            std::set_intersection(acc.begin(), acc.end(), next.begin(), next.end(),
                                  std::inserter(kept, kept.end()));
            acc = std::move(kept);
          }
          return acc;
        } else if constexpr (std::is_same_v<T, UnionExpr>) {
          AnswerSet acc;
          for (const auto& a : e.args) {
            const AnswerSet& s = bound(a);
            acc.insert(s.begin(), s.end());
          }
          return acc;
        } else if constexpr (std::is_same_v<T, NegationExpr>) {
          AnswerSet acc = bound(e.primary);
          for (const auto& a : e.subtracted) {
            for (const auto& x : bound(a)) acc.erase(x);
          }
          return acc;
        } else {
          return bound(e.id);
        }
      },
      expr);
}

}  // namespace kgagent
