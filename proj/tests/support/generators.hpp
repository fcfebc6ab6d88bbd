#pragma once

#include <random>
#include <string>
#include <vector>

#include "kgagent/plan.hpp"
#include "kgagent/trajectory.hpp"

namespace testing {

/// Random acyclic plan: every reference points to an earlier-declared id, and
/// the declaration order is then shuffled so execution_order has work to do.
inline kgagent::Plan random_plan(std::mt19937_64& rng, size_t max_size = 8) {
  using namespace kgagent;
  const size_t n = 1 + rng() % max_size;
  std::vector<SubQuestion> sqs;
  auto pick = [&](size_t below) { return "S" + std::to_string(1 + rng() % below); };
  for (size_t i = 0; i < n; ++i) {
    SubQuestion sq;
    sq.id = "S" + std::to_string(i + 1);
    size_t kind = i == 0 ? 0 : rng() % 5;
    switch (kind) {
      case 0:
        sq.expr = AnsExpr{"thing", {"Entity " + std::to_string(rng() % 5), false}, "rel"};
        break;
      case 1:
        sq.expr = AnsExpr{"thing", {pick(i), true}, "rel"};
        break;
      case 2: {
        size_t k = 2 + rng() % 3;
        std::vector<std::string> args;
        for (size_t j = 0; j < k; ++j) args.push_back(pick(i));
        if (rng() % 2) {
          sq.expr = InterExpr{args};
        } else {
          sq.expr = UnionExpr{args};
        }
        break;
      }
      case 3: {
        std::vector<std::string> sub;
        size_t k = rng() % 3;
        for (size_t j = 0; j < k; ++j) sub.push_back(pick(i));
        sq.expr = NegationExpr{pick(i), sub};
        break;
      }
      default:
        sq.expr = RefExpr{pick(i)};
    }
    sqs.push_back(std::move(sq));
  }
  std::shuffle(sqs.begin(), sqs.end(), rng);
  return Plan{std::move(sqs)};
}

inline kgagent::AnswerSet random_set(std::mt19937_64& rng, size_t universe = 6) {
  kgagent::AnswerSet s;
  for (size_t i = 0; i < universe; ++i) {
    if (rng() % 2) s.insert("a" + std::to_string(i));
  }
  return s;
}

/// Random tag sequence with contents that never contain a delimiter.
inline kgagent::Trajectory random_trajectory(std::mt19937_64& rng, size_t max_steps = 40) {
  using namespace kgagent;
  static const std::vector<std::string> contents = {
      "", "Iran", "Iranian rial | currency_of", "a < b", "x > y", "Tokyo; Kyoto",
      "multi\nline", "  padded  ", "S1: Ans(country | capital(Japan, ?))", "<notatag", "100%"};
  Trajectory t;
  size_t n = rng() % (max_steps + 1);
  for (size_t i = 0; i < n; ++i) {
    Step s;
    s.tag = kAllTags[rng() % kAllTags.size()];
    s.content = contents[rng() % contents.size()];
    t.steps.push_back(std::move(s));
  }
  return t;
}

}  // namespace testing
