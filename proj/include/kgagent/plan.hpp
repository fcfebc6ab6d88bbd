#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kgagent/error.hpp"

namespace kgagent {

/// Sorted set of normalized answer texts.
using AnswerSet = std::set<std::string>;

/// Head of a single-hop query: a literal entity text, or "each answer of"
/// another sub-question.
struct Head {
  std::string text;
  bool is_ref = false;

  bool operator==(const Head&) const = default;
};

/// Ans(type | relation(head, ?)) -- resolved by tool calls, not by eval_expr.
struct AnsExpr {
  std::string target_type;
  Head head;
  std::string relation;

  bool operator==(const AnsExpr&) const = default;
};

struct InterExpr {
  std::vector<std::string> args;
  bool operator==(const InterExpr&) const = default;
};

struct UnionExpr {
  std::vector<std::string> args;
  bool operator==(const UnionExpr&) const = default;
};

/// primary minus the union of subtracted.
struct NegationExpr {
  std::string primary;
  std::vector<std::string> subtracted;
  bool operator==(const NegationExpr&) const = default;
};

struct RefExpr {
  std::string id;
  bool operator==(const RefExpr&) const = default;
};

using Expr = std::variant<AnsExpr, InterExpr, UnionExpr, NegationExpr, RefExpr>;

/// Sub-question ids referenced by `expr`, in argument order.
std::vector<std::string> references(const Expr& expr);

std::string render_expr(const Expr& expr);

struct SubQuestion {
  std::string id;
  std::string text;  // optional natural-language gloss
  Expr expr;
};

struct Plan {
  std::vector<SubQuestion> sub_questions;

  const SubQuestion* find(std::string_view id) const;
  std::vector<std::string> dependencies(std::string_view id) const;
  /// Render back to the plan language, one sub-question per line.
  std::string render() const;
};

class PlanError : public Error {
 public:
  PlanError(size_t line, const std::string& message);
  size_t line() const { return line_; }

 private:
  size_t line_;
};

/// Grammar, one sub-question per non-blank line:
///   ID: ["gloss"] EXPR
///   EXPR := Ans(type | relation(head, ?)) | inter(ID, ID, ...) | union(ID, ID, ...)
///         | negation(ID; ID, ...) | ID
/// IDs look like S1, S2, ...; a head equal to an ID refers to that sub-question.
Plan parse_plan(std::string_view content);

/// Dependency-respecting order; among ready sub-questions, declaration order wins.
std::vector<std::string> execution_order(const Plan& plan);

using Binding = std::map<std::string, AnswerSet>;

/// Set algebra over bound sub-answers. Ans expressions are rejected.
AnswerSet eval_expr(const Expr& expr, const Binding& bindings);

}  // namespace kgagent
