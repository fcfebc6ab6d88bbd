#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "kgagent/trajectory.hpp"

using namespace kgagent;

namespace {

const char* kConforming =
    "<think>Find the country.</think>\n"
    "<plan>S1: Ans(country | currency_of(Iranian rial, ?))</plan>\n"
    "<relation_search>Iranian rial | currency_of</relation_search>\n"
    "<relation_information>currency_of</relation_information>\n"
    "<neighbor_search>Iranian rial | currency_of</neighbor_search>\n"
    "<neighbor_information>Iran</neighbor_information>\n"
    "<answer>Iran</answer>";

std::vector<std::string> codes(const FormatReport& r) {
  std::vector<std::string> out;
  for (const auto& v : r.violations) out.push_back(v.code);
  return out;
}

}  // namespace

TEST_CASE("tag vocabulary") {
  CHECK(kAllTags.size() == 9);
  for (Tag t : kAllTags) CHECK(tag_from_name(tag_name(t)) == t);
  CHECK_FALSE(tag_from_name("lookup").has_value());
  CHECK(information_for(Tag::kWebSearch) == Tag::kWebInformation);
  CHECK_THROWS_AS(information_for(Tag::kThink), Error);
  CHECK(open_delim(Tag::kPlan) == "<plan>");
  CHECK(close_delim(Tag::kAnswer) == "</answer>");
}

TEST_CASE("parse segments blocks") {
  auto t = parse_trajectory("<plan>P</plan><answer>Iran</answer>", "q");
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].tag == Tag::kPlan);
  CHECK(t.steps[0].content == "P");
  CHECK(t.steps[1].tag == Tag::kAnswer);
  CHECK(t.steps[1].content == "Iran");
  CHECK(t.steps[1].block_span == Span{14, 35});
  CHECK(t.steps[1].content_span == Span{22, 26});
  CHECK(parse_trajectory("", "q").steps.empty());
  CHECK(parse_trajectory("  \n ", "q").steps.empty());
}

TEST_CASE("parse errors carry codes") {
  auto code_of = [](const char* text, ParseOptions o = {}) -> std::string {
    try {
      parse_trajectory(text, "q", o);
    } catch (const ParseError& e) {
      return e.code();
    }
    return "";
  };
  CHECK(code_of("<lookup>x</lookup>") == "UNKNOWN_TAG");
  CHECK(code_of("<think>a <lookup> b</think>") == "UNKNOWN_TAG");
  CHECK(code_of("<think>never closed") == "UNCLOSED_TAG");
  CHECK(code_of("<think>a<plan>b</plan></think>") == "NESTED_TAG");
  CHECK(code_of("</answer>") == "STRAY_CLOSE");
  CHECK(code_of("hello <answer>x</answer>", ParseOptions{true}) == "STRAY_TEXT");
  CHECK(code_of("a < b and c<d <answer>x</answer>") == "");
}

TEST_CASE("bare text becomes implicit think outside strict mode") {
  auto t = parse_trajectory("  I should plan. <answer>x</answer> trailing", "q");
  REQUIRE(t.steps.size() == 3);
  CHECK(t.steps[0].tag == Tag::kThink);
  CHECK(t.steps[0].implicit);
  CHECK(t.steps[0].content == "I should plan.");
  CHECK(t.steps[2].content == "trailing");
}

TEST_CASE("information blocks keep tool output verbatim") {
  auto t = parse_trajectory(
      "<web_search>x | y</web_search><web_information>a <think> b</web_information>", "q");
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[1].content == "a <think> b");
}

TEST_CASE("validate_format") {
  CHECK(validate_format(parse_trajectory(kConforming, "q")).valid);

  auto two_plans = check_format("<plan>a</plan><plan>b</plan><answer>x</answer>");
  CHECK(codes(two_plans) == std::vector<std::string>{"PLAN_COUNT"});

  auto orphan = check_format(
      "<plan>a</plan><think>t</think><neighbor_information>Iran</neighbor_information>"
      "<answer>x</answer>");
  CHECK(codes(orphan) == std::vector<std::string>{"ORPHAN_INFO"});

  auto mismatched = check_format(
      "<plan>a</plan><relation_search>x | y</relation_search>"
      "<neighbor_information>Iran</neighbor_information><answer>x</answer>");
  CHECK(codes(mismatched) == std::vector<std::string>{"ORPHAN_INFO"});

  CHECK(codes(check_format("<lookup>x</lookup>")) == std::vector<std::string>{"UNKNOWN_TAG"});
  CHECK(codes(check_format("<plan>a</plan>")) == std::vector<std::string>{"ANSWER_COUNT"});
  CHECK(codes(check_format("<plan>a</plan><answer>x</answer><think>t</think>")) ==
        std::vector<std::string>{"ANSWER_COUNT"});
  CHECK(codes(check_format("<relation_search>a | b</relation_search>"
                           "<relation_information>b</relation_information>"
                           "<plan>p</plan><answer>x</answer>")) ==
        std::vector<std::string>{"PLAN_NOT_FIRST_ACTION"});

  auto t = parse_trajectory(kConforming, "q");
  CHECK(codes(validate_format(t)) == codes(validate_format(t)));
}

TEST_CASE("render round-trips") {
  auto t = parse_trajectory(kConforming, "q");
  CHECK(render_trajectory(t) == kConforming);
  CHECK(parse_trajectory(render_trajectory(t), "q").step_equal(t));

  auto empty = parse_trajectory("<think></think>", "q");
  CHECK(render_trajectory(empty) == "<think></think>");
}

TEST_CASE("random 50-step tag sequences round-trip") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"Iran", "a < b", "x | y", "  spaced ", "", "Tokyo;Kyoto",
                                          "line\nbreak"};
  for (int round = 0; round < 100; ++round) {
    Trajectory t;
    for (int i = 0; i < 50; ++i) {
      Step s;
      s.tag = kAllTags[rng() % kAllTags.size()];
      s.content = words[rng() % words.size()];
      t.steps.push_back(s);
    }
    auto back = parse_trajectory(render_trajectory(t), "q");
    CHECK(back.step_equal(t));
  }
}

TEST_CASE("retrieval mask") {
  CHECK(retrieval_mask(parse_trajectory("<plan>p</plan><answer>x</answer>", "q")).empty());

  auto one = parse_trajectory(
      "<neighbor_search>a | b</neighbor_search><neighbor_information>Iran</neighbor_information>",
      "q");
  auto m1 = retrieval_mask(one);
  REQUIRE(m1.size() == 1);
  CHECK(one.raw.substr(m1[0].begin, m1[0].length()) ==
        "<neighbor_information>Iran</neighbor_information>");

  std::string text =
      "<think>a</think><relation_information>r</relation_information><think>b</think>"
      "<neighbor_information>n</neighbor_information><think>c</think>"
      "<web_information>w</web_information><answer>x</answer>";
  auto t = parse_trajectory(text, "q");
  auto m = retrieval_mask(t);
  REQUIRE(m.size() == 3);
  size_t masked = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    masked += m[i].length();
    if (i) CHECK(m[i - 1].end <= m[i].begin);
  }
  size_t unmasked = 0;
  for (const auto& s : t.steps) {
    if (!is_information(s.tag)) unmasked += s.block_span.length();
  }
  CHECK(masked + unmasked == text.size());
}

TEST_CASE("answer lists") {
  CHECK(parse_answer_list(" Iran ; islamic republic of iran| Iran ") ==
        std::vector<std::string>{"iran", "islamic republic of iran"});
  CHECK(parse_answer_list("").empty());
  CHECK(parse_answer_list(";;").empty());
  auto t = parse_trajectory("<answer>a</answer><answer>B; c</answer>", "q");
  CHECK(predicted_answers(t) == std::vector<std::string>{"b", "c"});
  CHECK(predicted_answers(parse_trajectory("<plan>x</plan>", "q")).empty());
}

TEST_CASE("trajectory files") {
  auto p = testing::scratch_dir() / "traj.jsonl";
  save_trajectory_file(p, {{"q1", kConforming}, {"q2", ""}});
  auto back = load_trajectory_file(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "q1");
  CHECK(back[0].text == kConforming);
  CHECK(concat_contents(parse_trajectory(kConforming, "q"), Tag::kNeighborInformation) == "Iran");
}
