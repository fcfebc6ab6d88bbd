#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "kgagent/error.hpp"
#include "kgagent/kg_store.hpp"
#include "kgagent/text.hpp"

using namespace kgagent;

namespace {

KnowledgeGraph tk1() { return load_triples(testing::data_dir() / "tk1" / "triples.tsv"); }

KnowledgeGraph tk25() {
  auto d = testing::data_dir() / "tk25";
  return load_triples(d / "triples.tsv", d / "aliases.jsonl");
}

KnowledgeGraph random_graph(std::mt19937_64& rng, size_t n, size_t entities, size_t relations) {
  std::vector<Triple> ts;
  for (size_t i = 0; i < n; ++i) {
    ts.push_back({"e" + std::to_string(rng() % entities), "r" + std::to_string(rng() % relations),
                  "e" + std::to_string(rng() % entities)});
  }
  return KnowledgeGraph::build(ts);
}

}  // namespace

TEST_CASE("TK1 loads into 3 triples with 3 indexed heads") {
  auto kg = tk1();
  CHECK(kg.size() == 3);
  CHECK(kg.head_index().size() == 3);
  CHECK(kg.indices_consistent());
}

TEST_CASE("duplicate lines collapse") {
  auto p = testing::write_file("dup.tsv", "a\tr\tb\na\tr\tb\n\na\tr\tc\n");
  CHECK(load_triples(p).size() == 2);
}

TEST_CASE("malformed triple files are rejected with the line number") {
  auto p = testing::write_file("bad.tsv", "a\tr\tb\nonly\ttwo\n");
  CHECK_THROWS_WITH_AS(load_triples(p), "malformed triple at line 2", LoadError);
  auto four = testing::write_file("four.tsv", "a\tr\tb\tx\n");
  CHECK_THROWS_AS(load_triples(four), LoadError);
  auto empty = testing::write_file("empty.tsv", "\n\n");
  CHECK_THROWS_AS(load_triples(empty), LoadError);
  CHECK_THROWS_AS(load_triples(testing::scratch_dir() / "missing.tsv"), LoadError);
}

TEST_CASE("write_triples round-trips") {
  auto kg = tk25();
  auto p = testing::scratch_dir() / "rt.tsv";
  write_triples(p, kg);
  CHECK(load_triples(p).triples() == kg.triples());
}

TEST_CASE("aliases and entity resolution") {
  auto kg = tk25();
  CHECK(kg.display_name("Iran") == "Iran");
  CHECK(kg.aliases("Iran") == std::vector<std::string>{"Iran", "Islamic Republic of Iran"});
  CHECK(kg.display_name("Iranian_rial") == "Iranian rial");
  CHECK(kg.resolve("Iranian rial") == std::vector<std::string>{"Iranian_rial"});
  CHECK(kg.resolve("iranian_rial") == std::vector<std::string>{"Iranian_rial"});
  CHECK(kg.resolve("islamic republic of iran") == std::vector<std::string>{"Iran"});
  CHECK(kg.resolve("Apple") == std::vector<std::string>{"Apple_Inc."});
  CHECK(kg.resolve("Atlantis").empty());
  CHECK(kg.has_entity("Tehran"));
  CHECK_FALSE(kg.has_entity("Atlantis"));
}

TEST_CASE("relation_search") {
  auto kg = tk1();
  SUBCASE("single candidate is returned whatever the hypothesis") {
    CHECK(relation_search(kg, "Iranian_rial", "used in country") ==
          std::vector<std::string>{"currency_of"});
    CHECK(relation_search(kg, "Iranian_rial", "zzz") == std::vector<std::string>{"currency_of"});
  }
  SUBCASE("unknown entity and k < 1 give nothing") {
    CHECK(relation_search(kg, "Atlantis", "capital").empty());
    CHECK(relation_search(kg, "Iran", "capital", 0).empty());
  }
  SUBCASE("default k is 15") {
    std::vector<Triple> ts;
    for (int i = 0; i < 20; ++i) ts.push_back({"x", "rel_" + std::to_string(i), "y"});
    auto big = KnowledgeGraph::build(ts);
    CHECK(relation_search(big, "x", "rel").size() == 15);
    CHECK(kDefaultRelationTopK == 15);
  }
  SUBCASE("ranking prefers token overlap, then edit distance, then name") {
    auto g = KnowledgeGraph::build({{"x", "location.country", "a"},
                                    {"x", "currency_of", "b"},
                                    {"x", "used_in", "c"},
                                    {"x", "aaa", "d"},
                                    {"x", "bbb", "e"}});
    auto r = relation_search(g, "x", "used in country", 5);
    // used_in: 2/3, location.country: 1/4, currency_of: 0 -> then edit distance.
    REQUIRE(r.size() == 5);
    CHECK(r[0] == "used_in");
    CHECK(r[1] == "location.country");
  }
}

TEST_CASE("relation_search matches an exhaustive scoring oracle") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> words = {"place", "of", "birth", "country", "capital", "used",
                                          "in", "currency", "people", "person", "location"};
  auto phrase = [&](char sep) {
    std::string s;
    size_t n = 1 + rng() % 3;
    for (size_t i = 0; i < n; ++i) {
      if (i) s += sep;
      s += words[rng() % words.size()];
    }
    return s;
  };
  for (int round = 0; round < 200; ++round) {
    std::vector<Triple> ts;
    size_t nrel = 1 + rng() % 12;
    for (size_t i = 0; i < nrel; ++i) ts.push_back({"h", phrase(rng() % 2 ? '_' : '.'), "t"});
    ts.push_back({"other", "unrelated_relation", "t"});
    auto kg = KnowledgeGraph::build(ts);
    std::string hyp = phrase(' ');
    int k = 1 + static_cast<int>(rng() % 6);

    // Oracle: score every attached relation with an independent Jaccard.
    auto toks = [](const std::string& s) {
      std::set<std::string> out;
      std::string cur;
      for (char c : s + " ") {
        if (c == ' ' || c == '.' || c == '_') {
          if (!cur.empty()) out.insert(cur);
          cur.clear();
        } else {
          cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
      }
      return out;
    };
    std::vector<std::tuple<double, size_t, std::string>> all;
    for (const auto& rel : kg.relations_of("h")) {
      auto a = toks(hyp), b = toks(rel);
      size_t inter = 0;
      for (const auto& w : a) inter += b.count(w);
      double j = static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
      all.emplace_back(-j, edit_distance(hyp, rel), rel);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::string> expect;
    for (size_t i = 0; i < all.size() && static_cast<int>(i) < k; ++i) expect.push_back(std::get<2>(all[i]));

    auto got = relation_search(kg, "h", hyp, k);
    CHECK(got == expect);
    CHECK(static_cast<int>(got.size()) <= k);
    for (const auto& r : got) CHECK(kg.relations_of("h").count(r) == 1);
  }
}

TEST_CASE("neighbor_search") {
  auto kg = tk1();
  auto hit = neighbor_search(kg, "Iranian_rial", "currency_of");
  CHECK(hit.tails == std::vector<std::string>{"Iran"});
  CHECK(hit.render() == "Iran");
  CHECK(neighbor_search(kg, "Iranian_rial", "nonexistent_relation").render() ==
        "No information in KG, please use web tool.");
  CHECK(neighbor_search(kg, "Atlantis", "capital").render() == std::string(kKgSentinel));
  CHECK(is_kg_sentinel("No information in the KG, please use web tool."));
  CHECK(is_kg_sentinel(kKgSentinel));
  CHECK_FALSE(is_kg_sentinel("Iran"));
}

TEST_CASE("neighbor_search equals a brute-force scan on random graphs") {
  std::mt19937_64 rng(11);
  for (size_t n : {10u, 1000u, 10000u}) {
    auto kg = random_graph(rng, n, 200, 15);
    CHECK(kg.indices_consistent());
    for (int q = 0; q < 50; ++q) {
      std::string h = "e" + std::to_string(rng() % 200);
      std::string r = "r" + std::to_string(rng() % 15);
      std::set<std::string> expect;
      for (const auto& t : kg.triples()) {
        if (t.head == h && t.relation == r) expect.insert(t.tail);
      }
      auto got = neighbor_search(kg, h, r).tails;
      CHECK(std::set<std::string>(got.begin(), got.end()) == expect);
      CHECK(got.size() == expect.size());
    }
  }
}

TEST_CASE("removal_count is the ceiling of fraction times n") {
  CHECK(removal_count(0.4, 5) == 2);
  CHECK(removal_count(0.6, 5) == 3);
  CHECK(removal_count(0.2, 5) == 1);
  CHECK(removal_count(0.4, 1) == 1);
  CHECK(removal_count(0.0, 5) == 0);
  CHECK(removal_count(1.0, 5) == 5);
  CHECK(removal_count(0.4, 0) == 0);
  for (int n = 1; n <= 30; ++n) {
    for (int pct = 0; pct <= 100; ++pct) {
      // Exact integer ceiling of pct*n/100.
      size_t expect = static_cast<size_t>((pct * n + 99) / 100);
      CHECK(removal_count(pct / 100.0, static_cast<size_t>(n)) == expect);
    }
  }
}

TEST_CASE("sample_ikg") {
  auto kg = tk25();
  auto qa = load_qa(testing::data_dir() / "tk25" / "qa.jsonl");

  SUBCASE("fraction 0 is the identity") {
    auto s = sample_ikg(kg, qa, 0.0, 1);
    CHECK(s.graph.triples() == kg.triples());
    for (const auto& e : s.log.entries) CHECK(e.coverage == Coverage::CKG);
  }
  SUBCASE("fraction 1 removes every critical triple") {
    auto s = sample_ikg(kg, qa, 1.0, 1);
    for (const auto& q : qa) {
      for (const auto& t : q.critical_triples) CHECK_FALSE(s.graph.contains(t));
      CHECK(s.log.coverage_of(q.id) ==
            (q.critical_triples.empty() ? Coverage::CKG : Coverage::IKG));
    }
  }
  SUBCASE("co-pair relations go in both directions") {
    QAExample q;
    q.id = "x";
    q.critical_triples = {{"Canberra", "capital_of", "Australia"}};
    auto s = sample_ikg(kg, {q}, 1.0, 3);
    CHECK_FALSE(s.graph.contains({"Australia", "capital", "Canberra"}));
    CHECK(s.graph.contains({"Australia", "currency", "Australian_dollar"}));
    CHECK(s.graph.size() == kg.size() - 2);
    CHECK(s.graph.indices_consistent());
  }
  SUBCASE("five critical triples at 0.4 remove exactly two plus co-pairs") {
    std::vector<Triple> ts;
    QAExample q;
    q.id = "five";
    for (int i = 0; i < 5; ++i) {
      Triple t{"h" + std::to_string(i), "r", "t" + std::to_string(i)};
      ts.push_back(t);
      ts.push_back({t.tail, "back", t.head});
      ts.push_back({t.head, "other", t.tail});
      q.critical_triples.push_back(t);
    }
    auto g = KnowledgeGraph::build(ts);
    auto s = sample_ikg(g, {q}, 0.4, 9);
    REQUIRE(s.log.entries.size() == 1);
    CHECK(s.log.entries[0].removed.size() == 2);
    CHECK(s.graph.size() == g.size() - 6);
  }
  SUBCASE("same seed, same log; different seeds differ") {
    std::vector<Triple> ts;
    QAExample q;
    q.id = "many";
    for (int i = 0; i < 40; ++i) {
      Triple t{"h" + std::to_string(i), "r", "t" + std::to_string(i)};
      ts.push_back(t);
      q.critical_triples.push_back(t);
    }
    auto g = KnowledgeGraph::build(ts);
    auto a = sample_ikg(g, {q}, 0.5, 42), b = sample_ikg(g, {q}, 0.5, 42),
         c = sample_ikg(g, {q}, 0.5, 43);
    CHECK(a.log.entries[0].removed == b.log.entries[0].removed);
    CHECK(a.graph.triples() == b.graph.triples());
    CHECK(a.log.entries[0].removed != c.log.entries[0].removed);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(sample_ikg(kg, qa, 1.5, 1), Error);
    CHECK_THROWS_AS(sample_ikg(kg, qa, -0.1, 1), Error);
    QAExample q;
    q.id = "ghost";
    q.critical_triples = {{"A", "b", "C"}};
    CHECK_THROWS_WITH_AS(sample_ikg(kg, {q}, 0.5, 1),
                         doctest::Contains("ghost"), Error);
  }
  SUBCASE("removal log round-trips and re-derives the graph") {
    auto s = sample_ikg(kg, qa, 0.4, 2);
    auto p = testing::scratch_dir() / "log.jsonl";
    save_removal_log(p, s.log);
    auto log = load_removal_log(p);
    REQUIRE(log.entries.size() == s.log.entries.size());
    CHECK(log.fraction == 0.4);
    CHECK(log.seed == 2);
    for (size_t i = 0; i < log.entries.size(); ++i) {
      CHECK(log.entries[i].id == s.log.entries[i].id);
      CHECK(log.entries[i].removed == s.log.entries[i].removed);
      CHECK(log.entries[i].coverage == s.log.entries[i].coverage);
    }
    CHECK(apply_removal_log(kg, log).triples() == s.graph.triples());
    CHECK_FALSE(log.coverage_of("nope").has_value());
  }
  SUBCASE("inconsistent log is rejected") {
    auto p = testing::write_file("badlog.jsonl",
                                 R"({"id":"q","removed":[],"coverage":"IKG"})" "\n");
    CHECK_THROWS_AS(load_removal_log(p), LoadError);
    p = testing::write_file("mixedlog.jsonl",
                            R"({"id":"a","removed":[],"coverage":"CKG","fraction":0.4,"seed":1})"
                            "\n"
                            R"({"id":"b","removed":[],"coverage":"CKG","fraction":0.4,"seed":2})"
                            "\n");
    CHECK_THROWS_AS(load_removal_log(p), LoadError);
  }
}

TEST_CASE("QA and coverage parsing") {
  auto qa = load_qa(testing::data_dir() / "tk25" / "qa.jsonl");
  REQUIRE(qa.size() == 25);
  CHECK(qa[0].id == "q01");
  CHECK(qa[0].critical_triples == std::vector<Triple>{{"Iranian_rial", "currency_of", "Iran"}});
  CHECK(parse_coverage("IKG") == Coverage::IKG);
  CHECK(to_string(Coverage::CKG) == "CKG");
  CHECK_THROWS_AS(parse_coverage("ikg"), LoadError);
}
